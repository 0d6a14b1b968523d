#include <random>

#include <benchmark/benchmark.h>

#include "spdmidas/evaluation_harness.hpp"
#include "spdmidas/factor_extraction.hpp"
#include "spdmidas/midas_basis.hpp"
#include "spdmidas/penalized_solvers.hpp"

using namespace spdmidas;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  }
  return m;
}

// Intercept plus `groups` groups of four columns with a sparse true signal.
DesignAssembly sg_design(Eigen::Index rows, int groups) {
  Eigen::MatrixXd x = gaussian(rows, 1 + 4 * groups, 11);
  x.col(0).setOnes();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  for (int g = 0; g < std::min(groups, 5); ++g) beta.segment(1 + 4 * g, 4).setConstant(0.5);
  Eigen::VectorXd y = x * beta + gaussian(rows, 1, 12).col(0);
  std::vector<int> group_of{-1};
  for (int g = 0; g < groups; ++g) group_of.insert(group_of.end(), 4, g);
  return make_design(std::move(y), std::move(x), std::move(group_of));
}

void BM_SparseGroupFista(benchmark::State& state) {
  const DesignAssembly design = sg_design(state.range(0), static_cast<int>(state.range(1)));
  const double mu = 0.1 * mu_max(design, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_proximal(design, PenaltySpec::sparse_group(mu, 0.5)));
  }
}
BENCHMARK(BM_SparseGroupFista)->Args({100, 60})->Args({160, 120})->Unit(benchmark::kMillisecond);

void BM_LavaFit(benchmark::State& state) {
  const DesignAssembly design = sg_design(160, static_cast<int>(state.range(0)));
  const double mu1 = 0.1 * mu_max(design, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(lava_fit(design, mu1, 1.0, 0.5));
}
BENCHMARK(BM_LavaFit)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_LegendreAggregate(benchmark::State& state) {
  const auto k = static_cast<Eigen::Index>(state.range(0));
  TargetCalendar cal{Quarter::of(1983, 1), 160};
  HighFrequencyPanel panel("weekly", std::vector<std::string>(static_cast<std::size_t>(k)),
                           Frequency::weekly(), cal);
  panel.values() = gaussian(k, 160 * 13, 5);
  const LagLeadSpec spec{13, 1, 13};
  const LegendreBasis basis(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(aggregate(panel, spec, basis, cal.first + 1, cal.last()));
  }
}
BENCHMARK(BM_LegendreAggregate)->Arg(20)->Arg(100);

void BM_SoftImpute(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Eigen::MatrixXd m = gaussian(n, 2, 7) * gaussian(2, 40, 8) + 0.1 * gaussian(n, 40, 9);
  for (Eigen::Index i = n / 4; i < n / 2; ++i) m.row(i).head(10).setConstant(std::nan(""));
  CompletionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(complete_matrix(m, cfg));
}
BENCHMARK(BM_SoftImpute)->Arg(240)->Arg(480)->Unit(benchmark::kMillisecond);

void BM_PcaWithRankSelection(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian(640, 1, 3) * gaussian(1, 40, 4) + gaussian(640, 40, 5);
  for (auto _ : state) {
    const StandardizedMatrix z = standardize(x);
    const Eigen::VectorXd ev = covariance_eigenvalues(z);
    const RankSelection sel = select_rank(ev, RankMethod::growth_ratio, std::nullopt, z.matrix.cols(),
                                          z.matrix.rows(), 1);
    benchmark::DoNotOptimize(pca_extract(z, std::max(sel.selected, 1)));
  }
}
BENCHMARK(BM_PcaWithRankSelection)->Unit(benchmark::kMillisecond);

// One tuned sg-LASSO-MIDAS nowcast (prepare, blocked CV over the grid, fit).
void BM_TunedNowcast(benchmark::State& state) {
  const SyntheticData data = synthetic_dgp(DgpConfig{});
  HarnessConfig harness;
  ModelConfig model;
  model.kind = ModelKind::sg_lasso_midas;
  model.panels = {PanelRole{.panel_id = "macro"}, PanelRole{.panel_id = "financial"}};
  model.grid.points = static_cast<int>(state.range(0));
  model.grid.ratio = 1e-2;
  const Horizon eoq = default_horizons().back();
  const PreparedOrigin prepared = prepare_origin(harness, data.store, Quarter::of(2015, 1), eoq);
  const LeadMap leads = leads_for(model, eoq, prepared.inputs);
  for (auto _ : state) benchmark::DoNotOptimize(nowcast(model, prepared.inputs, leads));
}
BENCHMARK(BM_TunedNowcast)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
