#pragma once

#include <optional>

#include "fkrig/analysis.hpp"
#include "fkrig/em_complete.hpp"
#include "fkrig/stage1.hpp"

namespace fkrig {

// Whole fitting recipe: optional decay transform, first-stage marginal models,
// then a direct fit on a regular grid or EM completion on an irregular one.

struct PipelineOptions {
  bool transform = false;
  Stage1Options stage1;
  EMOptions em;
  FitOptions fit;  // regular-grid fit
};

struct PipelineResult {
  KrigingModel model;
  Stage1Result stage1;
  std::optional<EMResult> em;  // set when the data were irregular
  std::optional<DecayTransform> decay;
  MaskMatrix observed;  // on the model grid
};

PipelineResult run_pipeline(const FunctionalDataset& data, const PipelineOptions& opts = {});

// Keeps only the abscissae shared by every run.
FunctionalDataset common_grid_data(const FunctionalDataset& data);

// Fit procedures for mscv built from the pipeline.
FitProcedure pipeline_procedure(const PipelineOptions& opts);
FitProcedure common_grid_procedure(const PipelineOptions& opts);

}  // namespace fkrig
