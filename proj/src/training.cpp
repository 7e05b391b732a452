#include "dudf/training.hpp"

#include "dudf/eigen3.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace dudf {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_finite(double v, const char* term, int iteration, long index) {
  if (!std::isfinite(v))
    throw TrainingError(std::string("non-finite ") + term + " loss", iteration, term, index);
}

// Per-sample pieces of the surrogate 1 - |a| / q with u = H n, a = n.u,
// q = |u|. Returns false for skipped samples.
struct SurrogateTerm {
  double value = 0.0;
  SymmetricEntries grad{};  // d(value)/d(unique Hessian entry)
};

bool mcurv_surrogate_term(const Jet2& jet, const Vec3& n, SurrogateTerm& out) {
  const EigenDecomp3 eig = symmetric_eig3(jet.hessian);
  if (eig.gap() < 1e-9) return false;
  const Mat3 h = jet.hessian_matrix();
  const Vec3 u = h * n;
  const double q = u.norm();
  if (!(q > 1e-9)) return false;
  const double a = n.dot(u);
  out.value = 1.0 - std::abs(a) / q;
  for (int p = 0; p < 6; ++p) {
    const auto [i, j] = kSymmetricPairs[p];
    const double da = i == j ? n[i] * n[i] : 2.0 * n[i] * n[j];
    const double dq = i == j ? u[i] * n[i] / q : (u[i] * n[j] + u[j] * n[i]) / q;
    out.grad[p] = -(sign(a) * da / q - std::abs(a) * dq / (q * q));
  }
  return true;
}

struct Groups {
  std::vector<PointGroup> groups;
  std::vector<const std::vector<TrainingSample>*> samples;
};

Groups make_groups(const TrainingBatch& batch, const LossWeights& w, bool refinement) {
  Groups g;
  auto add = [&](const std::vector<TrainingSample>& samples, JetOrder order) {
    PointGroup group;
    group.order = order;
    group.points.reserve(samples.size());
    for (const auto& s : samples) group.points.push_back(s.position);
    g.groups.push_back(std::move(group));
    g.samples.push_back(&samples);
  };
  if (refinement) {
    add(batch.surface, JetOrder::Value);
    return g;
  }
  const JetOrder off_surface = w.eikonal > 0.0 ? JetOrder::Gradient : JetOrder::Value;
  const JetOrder surface = w.mcurv > 0.0 ? JetOrder::Hessian
                           : (w.eikonal > 0.0 || w.neumann > 0.0) ? JetOrder::Gradient
                                                                  : JetOrder::Value;
  add(batch.surface, surface);
  add(batch.near, off_surface);
  add(batch.far, off_surface);
  return g;
}

// Objective values for the groups built by make_groups, with adjoints when
// `adjoints` is non-null.
LossBreakdown evaluate_objective(const Groups& g, const std::vector<std::vector<Jet2>>& jets,
                                 const TrainConfig& config, bool refinement,
                                 std::vector<std::vector<JetAdjoint>>* adjoints, int iteration) {
  const LossWeights& w = config.weights;
  LossBreakdown b;

  if (refinement) {
    const auto& sj = jets[0];
    const double n = static_cast<double>(sj.size());
    if (sj.empty()) throw std::invalid_argument("refinement loss needs a nonempty surface batch");
    double mean = 0.0;
    for (const auto& j : sj) mean += j.value;
    mean /= n;
    double var = 0.0;
    for (const auto& j : sj) var += (j.value - mean) * (j.value - mean);
    const double sd = std::sqrt(var / n);
    b.refinement = w.refine_mean * std::abs(mean) + w.refine_std * sd;
    require_finite(b.refinement, "refinement", iteration, -1);
    b.total = b.refinement;
    if (adjoints) {
      for (std::size_t i = 0; i < sj.size(); ++i) {
        double a = w.refine_mean * sign(mean) / n;
        if (sd > 0.0) a += w.refine_std * (sj[i].value - mean) / (n * sd);
        (*adjoints)[0][i].value = a;
      }
    }
    return b;
  }

  std::size_t n_all = 0;
  for (const auto& grp : g.groups) n_all += grp.points.size();
  const double inv_all = 1.0 / static_cast<double>(n_all);
  const bool with_gradient = config.weights.eikonal > 0.0;

  long flat_index = 0;
  for (std::size_t gi = 0; gi < g.groups.size(); ++gi) {
    const auto& samples = *g.samples[gi];
    const bool has_grad = g.groups[gi].order != JetOrder::Value;
    for (std::size_t i = 0; i < samples.size(); ++i, ++flat_index) {
      const Jet2& jet = jets[gi][i];
      const double d = samples[i].target_distance;
      const double target = scaled_distance(d, config.alpha);
      const double r_dir = jet.value - target;
      require_finite(r_dir, "dirichlet", iteration, flat_index);
      b.dirichlet += std::abs(r_dir) * inv_all;
      if (adjoints) (*adjoints)[gi][i].value += w.dirichlet * sign(r_dir) * inv_all;

      if (with_gradient && has_grad) {
        const double gn = jet.gradient.norm();
        const double r_eik = gn - phi(d, config.alpha);
        require_finite(r_eik, "eikonal", iteration, flat_index);
        b.eikonal += std::abs(r_eik) * inv_all;
        if (adjoints && gn > 0.0)
          (*adjoints)[gi][i].gradient += w.eikonal * sign(r_eik) * inv_all / gn * jet.gradient;
      }
    }
  }

  // Surface-only terms.
  const auto& surface = *g.samples[0];
  const auto& sj = jets[0];
  const double ns = static_cast<double>(surface.size());
  if (g.groups[0].order != JetOrder::Value && !surface.empty()) {
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const double gn = sj[i].gradient.norm();
      require_finite(gn, "neumann", iteration, static_cast<long>(i));
      b.neumann += gn / ns;
      if (adjoints && gn > 0.0) (*adjoints)[0][i].gradient += w.neumann / (ns * gn) * sj[i].gradient;
    }
  }

  if (g.groups[0].order == JetOrder::Hessian && !surface.empty()) {
    std::vector<SurrogateTerm> terms(surface.size());
    std::vector<char> used(surface.size(), 0);
    std::size_t counted = 0;
    double eigen_sum = 0.0;
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const Vec3& n = *surface[i].normal;
      if (mcurv_surrogate_term(sj[i], n, terms[i])) {
        used[i] = 1;
        ++counted;
        require_finite(terms[i].value, "mcurv", iteration, static_cast<long>(i));
        b.mcurv += terms[i].value;
        eigen_sum += 1.0 - std::abs(symmetric_eig3(sj[i].hessian).principal().dot(n));
      }
    }
    b.mcurv_skipped = surface.size() - counted;
    if (2 * b.mcurv_skipped > surface.size())
      throw TrainingError("more than half of the surface batch has a degenerate Hessian", iteration, "mcurv");
    if (counted > 0) {
      b.mcurv /= static_cast<double>(counted);
      b.mcurv_eigen = eigen_sum / static_cast<double>(counted);
      if (adjoints) {
        const double scale = w.mcurv / static_cast<double>(counted);
        for (std::size_t i = 0; i < surface.size(); ++i)
          if (used[i])
            for (int p = 0; p < 6; ++p) (*adjoints)[0][i].hessian[p] += scale * terms[i].grad[p];
      }
    }
  }

  b.total = w.eikonal * b.eikonal + w.dirichlet * b.dirichlet + w.neumann * b.neumann + w.mcurv * b.mcurv;
  require_finite(b.total, "total", iteration, -1);
  return b;
}

}  // namespace

void LossWeights::check() const {
  for (double v : {eikonal, dirichlet, neumann, mcurv, refine_mean, refine_std})
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and nonnegative");
}

std::vector<LrPhase> default_phases() {
  return {{1.0 / 3.0, 1e-4, false, false}, {1.0 / 3.0, 1e-5, false, false}, {1.0 / 3.0, 1e-7, true, true}};
}

void TrainConfig::check() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (batch_size == 0 || batch_size % 3 != 0) throw std::invalid_argument("batch size must be a positive multiple of 3");
  weights.check();
  if (phases.empty()) throw std::invalid_argument("schedule needs at least one phase");
  double sum = 0.0;
  for (const auto& p : phases) {
    if (!(p.fraction > 0.0)) throw std::invalid_argument("phase fractions must be positive");
    if (!(p.learning_rate > 0.0)) throw std::invalid_argument("learning rates must be positive");
    sum += p.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("phase fractions must sum to 1");
  if (!(near_sigma > 0.0)) throw std::invalid_argument("near_sigma must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (hidden_layers < 1 || width < 1) throw std::invalid_argument("network sizes must be positive");
  if (!(omega0 > 0.0)) throw std::invalid_argument("omega0 must be positive");
}

ScheduleStep schedule_at(const TrainConfig& config, int iteration) {
  const int total = config.iterations;
  double cumulative = 0.0;
  int begin = 0;
  for (std::size_t k = 0; k < config.phases.size(); ++k) {
    cumulative += config.phases[k].fraction;
    const int end = k + 1 == config.phases.size() ? total : static_cast<int>(std::lround(cumulative * total));
    if (iteration < end || k + 1 == config.phases.size()) {
      const LrPhase& ph = config.phases[k];
      double lr = ph.learning_rate;
      if (ph.cosine && end > begin)
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * (iteration - begin) / static_cast<double>(end - begin)));
      return {k, lr, ph.refinement};
    }
    begin = end;
  }
  return {};
}

AdamState AdamState::for_network(const SirenNetwork& net) {
  AdamState s;
  s.first = ParameterGradients::zeros_like(net);
  s.second = ParameterGradients::zeros_like(net);
  return s;
}

void adam_step(SirenNetwork& net, const ParameterGradients& grads, AdamState& state, double lr) {
  if (!grads.all_finite()) throw std::invalid_argument("adam_step: non-finite gradient");
  if (grads.layers.size() != net.layers.size() || state.first.layers.size() != net.layers.size())
    throw std::invalid_argument("adam_step: shapes are not congruent");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weight, grads.layers[l].weight, state.first.layers[l].weight, state.second.layers[l].weight);
    update(net.layers[l].bias, grads.layers[l].bias, state.first.layers[l].bias, state.second.layers[l].bias);
  }
}

TrainingError::TrainingError(const std::string& what, int iteration, std::string term, long index)
    : Error(what + " (iteration " + std::to_string(iteration) + ", term " + term +
            (index >= 0 ? ", point " + std::to_string(index) : std::string()) + ")"),
      iteration_(iteration),
      term_(std::move(term)),
      index_(index) {}

double eikonal_loss(std::span<const Jet2> jets, std::span<const double> distances, const ScalingParams& p) {
  if (jets.size() != distances.size()) throw std::invalid_argument("eikonal_loss: size mismatch");
  if (jets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < jets.size(); ++i) sum += std::abs(jets[i].gradient.norm() - phi(distances[i], p));
  return sum / static_cast<double>(jets.size());
}

double dirichlet_loss(std::span<const Jet2> jets, std::span<const double> targets) {
  if (jets.size() != targets.size()) throw std::invalid_argument("dirichlet_loss: size mismatch");
  if (jets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < jets.size(); ++i) sum += std::abs(jets[i].value - targets[i]);
  return sum / static_cast<double>(jets.size());
}

double neumann_loss(std::span<const Jet2> surface_jets) {
  if (surface_jets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& j : surface_jets) sum += j.gradient.norm();
  return sum / static_cast<double>(surface_jets.size());
}

McurvResult mcurv_loss(std::span<const Jet2> surface_jets, std::span<const Vec3> normals) {
  if (surface_jets.size() != normals.size()) throw std::invalid_argument("mcurv_loss: size mismatch");
  McurvResult r;
  for (std::size_t i = 0; i < surface_jets.size(); ++i) {
    const EigenDecomp3 eig = symmetric_eig3(surface_jets[i].hessian);
    if (eig.gap() < 1e-9) {
      ++r.skipped;
      continue;
    }
    r.value += 1.0 - std::abs(eig.principal().dot(normals[i]));
    ++r.evaluated;
  }
  if (2 * r.skipped > surface_jets.size())
    throw TrainingError("more than half of the surface samples have a degenerate Hessian", -1, "mcurv");
  if (r.evaluated) r.value /= static_cast<double>(r.evaluated);
  return r;
}

McurvResult mcurv_surrogate(std::span<const Jet2> surface_jets, std::span<const Vec3> normals) {
  if (surface_jets.size() != normals.size()) throw std::invalid_argument("mcurv_surrogate: size mismatch");
  McurvResult r;
  for (std::size_t i = 0; i < surface_jets.size(); ++i) {
    SurrogateTerm t;
    if (!mcurv_surrogate_term(surface_jets[i], normals[i], t)) {
      ++r.skipped;
      continue;
    }
    r.value += t.value;
    ++r.evaluated;
  }
  if (2 * r.skipped > surface_jets.size())
    throw TrainingError("more than half of the surface samples have a degenerate Hessian", -1, "mcurv");
  if (r.evaluated) r.value /= static_cast<double>(r.evaluated);
  return r;
}

double refinement_loss(std::span<const double> values, double lambda_mean, double lambda_std) {
  if (values.empty()) throw std::invalid_argument("refinement_loss: empty surface batch");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return lambda_mean * std::abs(mean) + lambda_std * std::sqrt(var / n);
}

LossBreakdown total_loss(const TrainingBatch& batch, const SirenNetwork& net, const TrainConfig& config,
                         bool refinement) {
  const Groups g = make_groups(batch, config.weights, refinement);
  std::vector<std::vector<Jet2>> jets;
  for (const auto& grp : g.groups) jets.push_back(evaluate_jets(net, grp.points, grp.order));
  return evaluate_objective(g, jets, config, refinement, nullptr, -1);
}

namespace {

BatchGradient batch_gradient(const TrainingBatch& batch, const SirenNetwork& net, const TrainConfig& config,
                             bool refinement, int iteration) {
  const Groups g = make_groups(batch, config.weights, refinement);
  BatchGradient out;
  LossGradient lg = loss_gradients(net, g.groups, [&](const auto& jets, auto& adjoints) {
    out.breakdown = evaluate_objective(g, jets, config, refinement, &adjoints, iteration);
    return out.breakdown.total;
  });
  out.gradients = std::move(lg.gradients);
  return out;
}

}  // namespace

BatchGradient total_loss_gradients(const TrainingBatch& batch, const SirenNetwork& net, const TrainConfig& config,
                                   bool refinement) {
  return batch_gradient(batch, net, config, refinement, -1);
}

std::uint64_t batch_seed(std::uint64_t seed, int iteration) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(iteration) + 1));
}

void write_training_log(const std::vector<LogRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "# iteration phase lr total eikonal dirichlet neumann mcurv mcurv_eigen refinement grad_norm clipped\n";
  char buf[512];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d %zu %.6e %.9e %.9e %.9e %.9e %.9e %.9e %.9e %.6e %d\n", r.iteration, r.phase,
                  r.learning_rate, r.loss.total, r.loss.eikonal, r.loss.dirichlet, r.loss.neumann, r.loss.mcurv,
                  r.loss.mcurv_eigen, r.loss.refinement, r.grad_norm, r.clipped ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

TrainResult train(const OrientedPointCloud& cloud, const TrainConfig& config, const TrainObserver& observer) {
  config.check();
  cloud.check();
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.network = init_siren(config.hidden_layers, config.width, config.omega0, config.seed);
  if (config.iterations == 0) return result;

  const SpatialIndex index(cloud);
  AdamState adam = AdamState::for_network(result.network);
  result.log.reserve(static_cast<std::size_t>(config.iterations));

  for (int it = 0; it < config.iterations; ++it) {
    const ScheduleStep step = schedule_at(config, it);
    const TrainingBatch batch =
        sample_batch(cloud, index, config.batch_size, config.near_sigma, batch_seed(config.seed, it));

    BatchGradient bg = batch_gradient(batch, result.network, config, step.refinement, it);
    if (!bg.gradients.all_finite()) throw TrainingError("non-finite parameter gradient", it, "gradient");

    LogRecord rec;
    rec.iteration = it;
    rec.phase = step.phase;
    rec.learning_rate = step.learning_rate;
    rec.loss = bg.breakdown;
    rec.grad_norm = std::sqrt(bg.gradients.squared_norm());
    if (rec.grad_norm > config.clip_norm) {
      bg.gradients *= config.clip_norm / rec.grad_norm;
      rec.clipped = true;
    }
    adam_step(result.network, bg.gradients, adam, step.learning_rate);
    if (observer) observer(rec);
    result.log.push_back(rec);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace dudf
