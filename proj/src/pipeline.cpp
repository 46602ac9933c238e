#include "fkrig/pipeline.hpp"

#include <memory>

#include "fkrig/errors.hpp"

namespace fkrig {

PipelineResult run_pipeline(const FunctionalDataset& data, const PipelineOptions& opts) {
  data.validate();
  PipelineResult out;
  FunctionalDataset work = data;
  if (opts.transform) {
    out.decay = fit_decay_transform(mean_profile(data), data.union_grid());
    work = apply_transform(data, out.decay->lambda, TransformDirection::forward);
  }
  out.stage1 = run_stage1(work, opts.stage1);
  if (work.is_regular()) {
    out.model = fit_regular(RegularData::from(work), out.stage1.basis, out.stage1.init, opts.fit);
    out.observed = MaskMatrix::Constant(work.runs(), out.model.grid().size(), true);
  } else {
    EMResult em = run_em(work, out.stage1.basis, out.stage1.init, out.stage1.c0, opts.em);
    out.model = em.model;
    out.observed = em.observed;
    out.em = std::move(em);
  }
  if (out.decay) {
    out.model.set_decay_rate(out.decay->lambda);
  }
  return out;
}

FunctionalDataset common_grid_data(const FunctionalDataset& data) {
  const VectorXd grid = common_grid(data);
  if (grid.size() < 3) {
    throw DataError("common grid has fewer than 3 points");
  }
  return restrict_to_grid(data, grid);
}

namespace {

Predictor predictor_of(KrigingModel model) {
  auto m = std::make_shared<const KrigingModel>(std::move(model));
  return [m](const VectorXd& x, const VectorXd& t) { return m->predict_profile(x, t); };
}

}  // namespace

FitProcedure pipeline_procedure(const PipelineOptions& opts) {
  return [opts](const FunctionalDataset& train) { return predictor_of(run_pipeline(train, opts).model); };
}

FitProcedure common_grid_procedure(const PipelineOptions& opts) {
  return [opts](const FunctionalDataset& train) {
    return predictor_of(run_pipeline(common_grid_data(train), opts).model);
  };
}

}  // namespace fkrig
