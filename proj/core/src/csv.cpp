#include "fqte/csv.hpp"

#include "fqte/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace fqte {

namespace {

// RFC-4180 style field splitting: quoted fields may contain commas and
// doubled quotes. Trailing \r from CRLF files is stripped.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
        fields.back().pop_back();
    }
    return fields;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        table.rows.push_back(split_csv_line(line));
    }
    return table;
}

std::size_t column_index(const CsvTable& table, const std::string& name,
                         const std::string& file_label) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
        throw DataError("missing column '" + name + "' in " + file_label);
    }
    return static_cast<std::size_t>(it - table.header.begin());
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col,
                    const std::string& file_label) {
    std::string trimmed = cell;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
        trimmed.erase(trimmed.begin());
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
        trimmed.pop_back();
    double value = 0.0;
    const char* first = trimmed.data();
    const char* last = first + trimmed.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(file_label + " row " + std::to_string(row + 1) + ", column '" +
                        col + "': cannot parse numeric value '" + cell + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError(file_label + " row " + std::to_string(row + 1) + ", column '" +
                        col + "': non-finite value '" + cell + "'");
    }
    return value;
}

int parse_treatment(const std::string& cell, std::size_t row, const std::string& col,
                    const std::string& file_label) {
    double value = parse_number(cell, row, col, file_label);
    if (value == 0.0) return 0;
    if (value == 1.0) return 1;
    throw DataError(file_label + " row " + std::to_string(row + 1) + ", column '" + col +
                    "': non-binary treatment value '" + cell + "'");
}

const std::string& cell_at(const std::vector<std::string>& row, std::size_t idx,
                           std::size_t row_no, const std::string& file_label) {
    if (idx >= row.size()) {
        throw DataError(file_label + " row " + std::to_string(row_no + 1) +
                        ": too few fields");
    }
    return row[idx];
}

void format_value(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

FusedDataset load_fused_dataset(const std::filesystem::path& validation_path,
                                const std::filesystem::path& auxiliary_path,
                                const CsvSchema& schema) {
    if (schema.x_cols.empty()) throw ConfigError("schema: x_cols must not be empty");
    if (schema.s_cols.empty()) throw ConfigError("schema: s_cols must not be empty");

    const CsvTable val = read_table(validation_path);
    const CsvTable aux = read_table(auxiliary_path);
    const std::string val_label = "validation file";
    const std::string aux_label = "auxiliary file";

    for (const auto& s_col : schema.s_cols) {
        if (std::find(aux.header.begin(), aux.header.end(), s_col) != aux.header.end()) {
            throw DataError("auxiliary file must not contain the detailed covariate column '" +
                            s_col + "'");
        }
    }

    const std::size_t vy = column_index(val, schema.y_col, val_label);
    const std::size_t vt = column_index(val, schema.t_col, val_label);
    std::vector<std::size_t> vx, vs;
    for (const auto& c : schema.x_cols) vx.push_back(column_index(val, c, val_label));
    for (const auto& c : schema.s_cols) vs.push_back(column_index(val, c, val_label));

    const std::size_t ay = column_index(aux, schema.y_col, aux_label);
    const std::size_t at = column_index(aux, schema.t_col, aux_label);
    std::vector<std::size_t> ax;
    for (const auto& c : schema.x_cols) ax.push_back(column_index(aux, c, aux_label));

    const Eigen::Index n = static_cast<Eigen::Index>(val.rows.size());
    const Eigen::Index N = n + static_cast<Eigen::Index>(aux.rows.size());
    const Eigen::Index px = static_cast<Eigen::Index>(schema.x_cols.size());
    const Eigen::Index ps = static_cast<Eigen::Index>(schema.s_cols.size());

    Eigen::VectorXd y(N);
    Eigen::VectorXi t(N);
    Eigen::MatrixXd x(N, px);
    Eigen::MatrixXd s(n, ps);

    for (std::size_t r = 0; r < val.rows.size(); ++r) {
        const auto& row = val.rows[r];
        y[static_cast<Eigen::Index>(r)] =
            parse_number(cell_at(row, vy, r, val_label), r, schema.y_col, val_label);
        t[static_cast<Eigen::Index>(r)] =
            parse_treatment(cell_at(row, vt, r, val_label), r, schema.t_col, val_label);
        for (Eigen::Index j = 0; j < px; ++j) {
            x(static_cast<Eigen::Index>(r), j) = parse_number(
                cell_at(row, vx[j], r, val_label), r, schema.x_cols[j], val_label);
        }
        for (Eigen::Index j = 0; j < ps; ++j) {
            s(static_cast<Eigen::Index>(r), j) = parse_number(
                cell_at(row, vs[j], r, val_label), r, schema.s_cols[j], val_label);
        }
    }
    for (std::size_t r = 0; r < aux.rows.size(); ++r) {
        const auto& row = aux.rows[r];
        const Eigen::Index i = n + static_cast<Eigen::Index>(r);
        y[i] = parse_number(cell_at(row, ay, r, aux_label), r, schema.y_col, aux_label);
        t[i] = parse_treatment(cell_at(row, at, r, aux_label), r, schema.t_col, aux_label);
        for (Eigen::Index j = 0; j < px; ++j) {
            x(i, j) = parse_number(cell_at(row, ax[j], r, aux_label), r,
                                   schema.x_cols[j], aux_label);
        }
    }

    return FusedDataset::create(std::move(y), std::move(t), std::move(x), std::move(s), n);
}

void write_fused_dataset(const FusedDataset& ds,
                         const std::filesystem::path& validation_path,
                         const std::filesystem::path& auxiliary_path,
                         const CsvSchema& schema) {
    if (static_cast<Eigen::Index>(schema.x_cols.size()) != ds.px() ||
        static_cast<Eigen::Index>(schema.s_cols.size()) != ds.ps()) {
        throw ConfigError("schema column counts do not match the dataset");
    }

    auto write_header = [&](std::string& out, bool with_s) {
        out += schema.y_col;
        out += ',';
        out += schema.t_col;
        for (const auto& c : schema.x_cols) {
            out += ',';
            out += c;
        }
        if (with_s) {
            for (const auto& c : schema.s_cols) {
                out += ',';
                out += c;
            }
        }
        out += '\n';
    };

    std::string vbuf;
    write_header(vbuf, true);
    for (Eigen::Index i = 0; i < ds.n; ++i) {
        format_value(vbuf, ds.y[i]);
        vbuf += ',';
        vbuf += ds.t[i] == 1 ? '1' : '0';
        for (Eigen::Index j = 0; j < ds.px(); ++j) {
            vbuf += ',';
            format_value(vbuf, ds.x(i, j));
        }
        for (Eigen::Index j = 0; j < ds.ps(); ++j) {
            vbuf += ',';
            format_value(vbuf, ds.s(i, j));
        }
        vbuf += '\n';
    }
    std::ofstream vout(validation_path);
    if (!vout) throw DataError("cannot write file: " + validation_path.string());
    vout << vbuf;

    std::string abuf;
    write_header(abuf, false);
    for (Eigen::Index i = ds.n; i < ds.N(); ++i) {
        format_value(abuf, ds.y[i]);
        abuf += ',';
        abuf += ds.t[i] == 1 ? '1' : '0';
        for (Eigen::Index j = 0; j < ds.px(); ++j) {
            abuf += ',';
            format_value(abuf, ds.x(i, j));
        }
        abuf += '\n';
    }
    std::ofstream aout(auxiliary_path);
    if (!aout) throw DataError("cannot write file: " + auxiliary_path.string());
    aout << abuf;
}

}  // namespace fqte
