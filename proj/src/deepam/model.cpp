#include "deepam/model.hpp"

#include "deepam/cad.hpp"
#include "deepam/manifold_opt.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace deepam {

int DeepAMModel::input_dim() const {
  return layers.empty() ? static_cast<int>(D.cols()) : layers.front().d_in();
}

void DeepAMModel::validate() const {
  geom.validate();
  if (D.size() == 0) throw DataError("model has no synthesis dictionary");
  if (input_dim() != geom.lr_dim())
    throw DataError("model input dimension " + std::to_string(input_dim()) + " does not match the patch geometry");
  if (D.rows() != geom.hr_dim()) throw DataError("synthesis dictionary rows do not match the HR patch size");
  int prev = geom.lr_dim();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string at = "layer " + std::to_string(i + 1) + ": ";
    if (l.d_in() != prev) throw DataError(at + "input dimension breaks the layer chain");
    if (l.lambda.size() != l.d_out()) throw DataError(at + "one threshold per atom required");
    if (l.d_ipad < 0 || l.d_ipad > l.d_out()) throw DataError(at + "IPAD count out of range");
    if ((l.lambda.array() < 0.0).any() || l.lambda.hasNaN()) throw DataError(at + "thresholds must be non-negative");
    const Vector norms = l.omega.rowwise().norm();
    if (l.d_out() > 0 && (norms.array() - 1.0).abs().maxCoeff() > 1e-10) throw DataError(at + "atoms are not unit norm");
    prev = l.d_out();
  }
  if (D.cols() != prev) throw DataError("synthesis dictionary columns do not match the last layer");
  if (!(training_noise_sigma >= 0.0)) throw DataError("training noise sigma must be non-negative");
}

Matrix ReluNetwork::forward(const Matrix& X) const {
  Matrix a = X;
  for (std::size_t k = 0; k < biases.size(); ++k) {
    a = weights[k] * a;
    a.colwise() += biases[k];
    a = a.cwiseMax(0.0);
  }
  return weights.back() * a;
}

Matrix propagate(const std::vector<AnalysisLayer>& layers, const Matrix& X0, std::size_t depth) {
  Matrix X = X0;
  for (std::size_t i = 0; i < depth && i < layers.size(); ++i) {
    if (X.rows() != layers[i].d_in()) throw DataError("input dimension does not match layer " + std::to_string(i + 1));
    X = soft_threshold_rows(layers[i].omega * X, layers[i].lambda);
  }
  return X;
}

Matrix forward_batch(const DeepAMModel& model, const Matrix& X0) {
  if (X0.rows() != model.input_dim())
    throw DataError("input has " + std::to_string(X0.rows()) + " rows, model expects " + std::to_string(model.input_dim()));
  return model.D * propagate(model.layers, X0, model.layers.size());
}

Vector forward(const DeepAMModel& model, const Vector& x0) { return forward_batch(model, x0); }

Matrix final_synthesis(const Matrix& X_L, const Matrix& Y) { return ridge_synthesis(X_L, Y); }

ReluNetwork to_relu_network(const DeepAMModel& model) {
  ReluNetwork net;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const Eigen::Index d = l.d_out();
    Matrix stacked(2 * d, l.d_in());
    stacked << l.omega, -l.omega;
    Matrix W;
    if (i == 0) {
      W = std::move(stacked);
    } else {
      // the previous layer's output is ReLU(a) - ReLU(-a): fold [I, -I] in
      W.resize(2 * d, 2 * l.d_in());
      W << stacked, -stacked;
    }
    Vector b(2 * d);
    b << -l.lambda, -l.lambda;
    net.weights.push_back(std::move(W));
    net.biases.push_back(std::move(b));
  }
  if (model.layers.empty()) {
    net.weights.push_back(model.D);
  } else {
    Matrix last(model.D.rows(), 2 * model.D.cols());
    last << model.D, -model.D;
    net.weights.push_back(std::move(last));
  }
  return net;
}

DeepAMModel rescale_for_noise(const DeepAMModel& model, double sigma_T) {
  if (!(model.training_noise_sigma > 0.0))
    throw ConfigError("threshold rescaling needs a model trained on noisy inputs (sigma_N > 0)");
  if (!(sigma_T >= 0.0) || !std::isfinite(sigma_T)) throw ConfigError("test noise sigma must be a non-negative number");
  DeepAMModel out = model;
  out.training_noise_sigma = sigma_T;  // thresholds now match sigma_T
  if (out.layers.empty()) return out;
  const double ratio = sigma_T / model.training_noise_sigma;
  auto& first = out.layers.front();
  first.lambda.head(first.d_ipad) *= ratio * ratio;
  first.lambda.tail(first.d_cad()) *= ratio;
  return out;
}

Matrix degradation_matrix(const PatchGeometry& geom) {
  geom.validate();
  const int hs = geom.hr_side();
  Matrix H(geom.lr_dim(), geom.hr_dim());
  for (int k = 0; k < geom.hr_dim(); ++k) {
    GrayImage basis(hs, hs, 0.0);
    basis(k % hs, k / hs) = 1.0;  // column-major patch vectorisation
    const GrayImage lr = resize_bicubic(basis, 1.0 / geom.s);
    H.col(k) = Eigen::Map<const Vector>(lr.pixels().data(), lr.pixels().size());
  }
  return H;
}

std::vector<AtomCorrelation> atom_correlation_diagnostic(const DeepAMModel& model) {
  if (model.layers.size() != 1) throw ConfigError("atom correlation diagnostic is defined for single-layer models only");
  model.validate();
  const auto& layer = model.layers.front();
  const Matrix H = degradation_matrix(model.geom);
  const Matrix H_pinv = Eigen::CompleteOrthogonalDecomposition<Matrix>(H).pseudoInverse();
  std::vector<AtomCorrelation> out;
  for (int j = 0; j < layer.d_out(); ++j) {
    const Vector proj = H_pinv * layer.omega.row(j).transpose();
    const Vector d = model.D.col(j);
    const double denom = proj.norm() * d.norm();
    const double v = denom > 0.0 ? std::clamp(proj.dot(d) / denom, -1.0, 1.0) : 0.0;
    out.push_back({v, j < layer.d_ipad});
  }
  return out;
}

// ---- training ---------------------------------------------------------------

std::vector<LayerArch> parse_arch(const std::string& spec) {
  std::vector<LayerArch> arch;
  std::string trimmed;
  for (char c : spec)
    if (!std::isspace(static_cast<unsigned char>(c))) trimmed.push_back(c);
  if (trimmed.empty() || trimmed == "0") return arch;
  std::stringstream ss(trimmed);
  std::string item;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("invalid architecture '" + spec + "'");
    }
    if (used != s.size()) throw ConfigError("invalid architecture '" + spec + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    LayerArch l;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      l.atoms = to_int(item);
    } else {
      l.atoms = to_int(item.substr(0, colon));
      l.ipad = to_int(item.substr(colon + 1));
      if (l.ipad < 0) throw ConfigError("IPAD atom count must be non-negative in '" + spec + "'");
    }
    if (l.atoms < 1) throw ConfigError("layer atom count must be positive in '" + spec + "'");
    if (l.ipad > l.atoms) throw ConfigError("IPAD atom count exceeds the layer size in '" + spec + "'");
    arch.push_back(l);
  }
  return arch;
}

std::string format_arch(const std::vector<LayerArch>& arch) {
  if (arch.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(arch[i].atoms);
    if (arch[i].ipad >= 0) s += ":" + std::to_string(arch[i].ipad);
  }
  return s;
}

void TrainOptions::validate() const {
  geom.validate();
  grid.validate();
  if (!(training_noise_sigma >= 0.0)) throw ConfigError("training noise sigma must be non-negative");
  if (batch_size < 1 || num_batches < 1) throw ConfigError("batch size and batch count must be positive");
  if (iters_per_batch < 0 || single_batch_iters < 0) throw ConfigError("iteration counts must be non-negative");
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw ConfigError("rank tolerance must lie in (0,1)");
}

namespace {

using json = nlohmann::json;

Matrix gather_columns(const Matrix& M, const std::vector<Eigen::Index>& idx) {
  Matrix out(M.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = M.col(idx[k]);
  return out;
}

// Batches drawn without replacement from a pool reshuffled every epoch.
std::vector<std::vector<Eigen::Index>> batch_schedule(Eigen::Index n, Eigen::Index batch, int count,
                                                      std::mt19937_64& rng) {
  std::vector<std::vector<Eigen::Index>> out;
  if (batch >= n) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    out.push_back(std::move(all));
    return out;
  }
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  std::size_t cursor = pool.size();
  for (int b = 0; b < count; ++b) {
    if (cursor + static_cast<std::size_t>(batch) > pool.size()) {
      std::shuffle(pool.begin(), pool.end(), rng);
      cursor = 0;
    }
    std::vector<Eigen::Index> idx(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  pool.begin() + static_cast<std::ptrdiff_t>(cursor + batch));
    std::sort(idx.begin(), idx.end());
    out.push_back(std::move(idx));
    cursor += static_cast<std::size_t>(batch);
  }
  return out;
}

constexpr Eigen::Index kChunk = 20000;

// D from the full dataset without materialising X_L for every sample.
Matrix chunked_synthesis(const std::vector<AnalysisLayer>& layers, const PatchDataset& data) {
  const Eigen::Index d = layers.empty() ? data.X0.rows() : layers.back().d_out();
  Matrix gram = Matrix::Identity(d, d);
  Matrix cross = Matrix::Zero(d, data.Y.rows());
  for (Eigen::Index start = 0; start < data.size(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.size() - start);
    const Matrix X = propagate(layers, data.X0.middleCols(start, len), layers.size());
    gram.noalias() += X * X.transpose();
    cross.noalias() += X * data.Y.middleCols(start, len).transpose();
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("synthesis: X X^T + I is not positive definite");
  return llt.solve(cross).transpose();
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  if (!dst.empty() && !src.empty()) {
    dst.insert(dst.end(), src.begin() + 1, src.end());  // src[0] repeats dst.back() under warm start
  } else {
    dst.insert(dst.end(), src.begin(), src.end());
  }
}

struct LayerThresholds {
  Matrix omega_cad;
  ThresholdSearchResult ipad;
  ThresholdSearchResult cad;
  int dropped = 0;
  bool has_cad = false;
};

LayerThresholds learn_thresholds(const Matrix& omega_ipad, const Matrix& psi, const Matrix& D_layer, const Matrix& X,
                                 const Matrix& Y, const ThresholdSearchGrid& grid, const Logger& log) {
  LayerThresholds t;
  const LaplacianStats ipad_stats = estimate_sigmas(omega_ipad, X);
  if (ipad_stats.dead_count() > 0)
    log_line(log, "warning: " + std::to_string(ipad_stats.dead_count()) + " IPAD atoms have no response; threshold 0");
  t.ipad = search_rho_ipad(omega_ipad, X, Y, ipad_stats, grid);
  if (psi.rows() == 0) return t;
  t.has_cad = true;
  const Matrix residual = ipad_residual(omega_ipad, t.ipad.lambda, X, Y);
  ReparamResult rp = reparam_cad(psi, D_layer, log);
  t.dropped = static_cast<int>(psi.rows() - rp.omega.rows());
  t.omega_cad = std::move(rp.omega);
  const LaplacianStats cad_stats = estimate_sigmas(t.omega_cad, X);
  t.cad = search_rho_cad(t.omega_cad, X, residual, cad_stats, grid);
  return t;
}

}  // namespace

std::string TrainReport::to_json() const {
  json j;
  j["k_lr"] = k_lr;
  j["samples"] = samples;
  j["batches"] = batches;
  j["iterations_per_batch"] = iters_per_batch;
  j["seed"] = seed;
  j["train_mse"] = train_mse;
  j["linear_mse"] = linear_mse;
  j["layers"] = json::array();
  for (const auto& l : layers) {
    json jl;
    jl["atoms"] = l.atoms;
    jl["ipad_atoms"] = l.ipad;
    jl["cad_atoms"] = l.cad;
    jl["signal_rank"] = l.signal_rank;
    jl["target_rank"] = l.target_rank;
    jl["rho_ipad"] = l.rho_ipad;
    jl["rho_cad"] = l.rho_cad;
    jl["score_ipad"] = l.score_ipad;
    jl["score_cad"] = l.score_cad;
    jl["dead_atoms"] = l.dead_atoms;
    jl["dropped_cad_atoms"] = l.dropped_cad;
    jl["ipad_objective_trace"] = l.ipad_trace;
    jl["cad_objective_trace"] = l.cad_trace;
    jl["survivor_fractions"] = std::vector<double>(l.survivors.data(), l.survivors.data() + l.survivors.size());
    j["layers"].push_back(std::move(jl));
  }
  return j.dump(2);
}

double dataset_mse(const DeepAMModel& model, const PatchDataset& data) {
  if (data.size() == 0) return 0.0;
  double sse = 0.0;
  for (Eigen::Index start = 0; start < data.size(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, data.size() - start);
    sse += (forward_batch(model, data.X0.middleCols(start, len)) - data.Y.middleCols(start, len)).squaredNorm();
  }
  return sse / static_cast<double>(data.Y.size());
}

TrainResult train(const PatchDataset& data, const std::vector<LayerArch>& arch, const TrainOptions& options) {
  options.validate();
  const auto& log = options.log;
  const PatchGeometry& geom = options.geom;
  if (data.size() < 1) throw DataError("training set is empty");
  if (data.X0.rows() != geom.lr_dim() || data.Y.rows() != geom.hr_dim())
    throw DataError("training patches do not match the patch geometry");
  if (data.Y.cols() != data.X0.cols()) throw DataError("LR and HR patch counts differ");

  TrainResult result;
  DeepAMModel& model = result.model;
  TrainReport& report = result.report;
  model.geom = geom;
  model.training_noise_sigma = options.training_noise_sigma;
  report.samples = data.size();
  report.seed = options.seed;

  const Vector sv = singular_values(data.X0);
  int k_lr = 0;
  // resize round-off on flat images leaves entries near 1e-13 grey levels; treat that as zero
  const double floor = 1e-9 * std::sqrt(static_cast<double>(data.X0.size()));
  if (sv.size() > 0 && sv[0] > floor)
    while (k_lr < sv.size() && sv[k_lr] > options.rank_tol * sv[0]) ++k_lr;
  report.k_lr = k_lr;

  std::vector<LayerArch> layers_arch = arch;
  if (k_lr == 0 && !layers_arch.empty()) {
    log_line(log, "warning: LR training patches are all zero (rank 0); falling back to a linear model");
    layers_arch.clear();
  }
  // Resolve automatic IPAD sizes and reject rank-deficient layers up front.
  for (std::size_t i = 0; i < layers_arch.size(); ++i) {
    auto& l = layers_arch[i];
    if (l.ipad < 0) l.ipad = std::min(l.atoms, (i == 0 && options.training_noise_sigma > 0.0) ? 3 * k_lr : k_lr);
    if (l.ipad < k_lr)
      throw ConfigError("layer " + std::to_string(i + 1) + " has " + std::to_string(l.ipad) +
                        " IPAD atoms but the LR data has rank " + std::to_string(k_lr));
  }

  std::mt19937_64 rng(options.seed);
  const Eigen::Index batch = std::min<Eigen::Index>(data.size(), options.batch_size);
  const auto schedule = batch_schedule(data.size(), batch, options.num_batches, rng);
  const int iters = schedule.size() == 1 ? options.single_batch_iters : options.iters_per_batch;
  report.batches = static_cast<int>(schedule.size());
  report.iters_per_batch = iters;

  for (std::size_t li = 0; li < layers_arch.size(); ++li) {
    const LayerArch& la = layers_arch[li];
    const int n_cad = la.atoms - la.ipad;
    const int d_in = li == 0 ? geom.lr_dim() : model.layers.back().d_out();
    LayerReport lr;
    lr.atoms = la.atoms;
    lr.ipad = la.ipad;
    lr.cad = n_cad;
    log_line(log, "layer " + std::to_string(li + 1) + ": " + std::to_string(la.ipad) + " IPAD + " +
                      std::to_string(n_cad) + " CAD atoms on " + std::to_string(d_in) + "-dim input");

    const GoalPlusConfig ipad_cfg = ipad_config(d_in, la.ipad, iters);
    const GoalPlusConfig cad_cfg = cad_config(d_in, std::max(n_cad, 1), iters);
    Matrix omega_ipad, psi;
    Matrix X, Y;
    LayerSynthesis syn;
    LayerThresholds thresholds;
    for (std::size_t b = 0; b < schedule.size(); ++b) {
      X = propagate(model.layers, gather_columns(data.X0, schedule[b]), model.layers.size());
      Y = gather_columns(data.Y, schedule[b]);

      const SubspaceBasis in_basis = leading_subspace(X, k_lr);
      lr.signal_rank = in_basis.rank();
      OptimizeResult ip = learn_ipad(X, la.ipad, in_basis, ipad_cfg, omega_ipad, rng);
      omega_ipad = std::move(ip.omega);
      append(lr.ipad_trace, ip.trace);

      syn = layer_synthesis(X, Y);
      if (n_cad > 0) {
        const SubspaceBasis target_basis = compute_subspace(Y, options.rank_tol);
        lr.target_rank = target_basis.rank();
        OptimizeResult cp = learn_psi(syn.Ymid, syn.E, n_cad, target_basis, cad_cfg, psi, rng);
        psi = std::move(cp.omega);
        append(lr.cad_trace, cp.trace);
      }
      if (options.research_thresholds_per_batch && b + 1 < schedule.size()) {
        const LayerThresholds t = learn_thresholds(omega_ipad, psi, syn.D, X, Y, options.grid, {});
        log_line(log, "  batch " + std::to_string(b + 1) + ": rho_I=" + std::to_string(t.ipad.rho) +
                          (t.has_cad ? " rho_C=" + std::to_string(t.cad.rho) : std::string()));
      }
      log_line(log, "  batch " + std::to_string(b + 1) + "/" + std::to_string(schedule.size()) +
                        ": IPAD f=" + std::to_string(lr.ipad_trace.back()) +
                        (lr.cad_trace.empty() ? std::string() : " CAD f=" + std::to_string(lr.cad_trace.back())));
    }

    thresholds = learn_thresholds(omega_ipad, psi, syn.D, X, Y, options.grid, log);
    AnalysisLayer layer;
    layer.d_ipad = la.ipad;
    const Eigen::Index n_kept = thresholds.has_cad ? thresholds.omega_cad.rows() : 0;
    layer.omega.resize(la.ipad + n_kept, d_in);
    layer.lambda.resize(la.ipad + n_kept);
    layer.omega.topRows(la.ipad) = omega_ipad;
    layer.lambda.head(la.ipad) = thresholds.ipad.lambda;
    if (n_kept > 0) {
      layer.omega.bottomRows(n_kept) = thresholds.omega_cad;
      layer.lambda.tail(n_kept) = thresholds.cad.lambda;
    }
    lr.rho_ipad = thresholds.ipad.rho;
    lr.score_ipad = thresholds.ipad.score;
    lr.rho_cad = thresholds.cad.rho;
    lr.score_cad = thresholds.cad.score;
    lr.dropped_cad = thresholds.dropped;
    const LaplacianStats st = estimate_sigmas(layer.omega, X);
    lr.dead_atoms = st.dead_count();
    lr.survivors = survivor_fractions(soft_threshold_rows(layer.omega * X, layer.lambda));
    log_line(log, "  thresholds: rho_I=" + std::to_string(lr.rho_ipad) +
                      (thresholds.has_cad ? " rho_C=" + std::to_string(lr.rho_cad) : std::string()));
    model.layers.push_back(std::move(layer));
    report.layers.push_back(std::move(lr));
  }

  model.D = chunked_synthesis(model.layers, data);
  model.validate();

  DeepAMModel linear;
  linear.geom = geom;
  linear.D = chunked_synthesis({}, data);
  report.train_mse = dataset_mse(model, data);
  report.linear_mse = dataset_mse(linear, data);
  log_line(log, "training MSE " + std::to_string(report.train_mse) + " (linear " + std::to_string(report.linear_mse) + ")");
  return result;
}

}  // namespace deepam
