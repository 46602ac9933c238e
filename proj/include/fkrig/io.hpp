#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fkrig/dataset.hpp"
#include "fkrig/kron_kriging.hpp"

namespace fkrig {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // source line of each row
};

CsvTable read_csv(const std::filesystem::path& path);

// Header row of variable names, one numeric row per run. Columns without an
// entry in `kinds` become continuous over their observed range.
Design read_design_csv(const std::filesystem::path& path,
                       const std::map<std::string, VarKind>& kinds = {});
void write_design_csv(const std::filesystem::path& path, const Design& design);

// Long format with columns run_id,t,y (any order). run_ids run 1..n with
// n = design.size(); t must be strictly increasing within a run.
FunctionalDataset read_profiles_csv(const std::filesystem::path& path, const Design& design);
void write_profiles_csv(const std::filesystem::path& path, const FunctionalDataset& data);

// Columns are the design's variable names followed by t. Returns rows x (p + 1).
MatrixXd read_query_csv(const std::filesystem::path& path, const Design& design);

// Writes a header and rows of numbers, 17 significant digits.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const MatrixXd& rows);

struct ModelFile {
  KrigingModel model;
  MaskMatrix observed;  // cells of the model grid that were data rather than completed
};

inline constexpr int kModelFileVersion = 1;

std::string model_to_text(const KrigingModel& model, const MaskMatrix& observed);
ModelFile model_from_text(const std::string& text);
void save_model(const std::filesystem::path& path, const KrigingModel& model,
                const MaskMatrix& observed);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace fkrig
