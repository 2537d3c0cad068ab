#pragma once

#include "fqte/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fqte {

/// Column-name selection for the two CSV files. Columns are matched by
/// header name, not position; extra unrelated columns are ignored.
struct CsvSchema {
    std::string y_col = "y";
    std::string t_col = "t";
    std::vector<std::string> x_cols;
    std::vector<std::string> s_cols;
};

/// Loads the validation file (y, t, x, s columns) and the auxiliary file
/// (y, t, x columns; the s columns are required to be absent) into one
/// FusedDataset. Row order is preserved: validation rows first.
/// Throws DataError with row/column location on malformed cells.
FusedDataset load_fused_dataset(const std::filesystem::path& validation_path,
                                const std::filesystem::path& auxiliary_path,
                                const CsvSchema& schema);

/// Writes the two CSV files with headers from the schema. Values are emitted
/// with 17 significant digits so a load reproduces the dataset exactly.
void write_fused_dataset(const FusedDataset& ds,
                         const std::filesystem::path& validation_path,
                         const std::filesystem::path& auxiliary_path,
                         const CsvSchema& schema);

}  // namespace fqte
