#include "weavesim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace weavesim {

namespace {
// Fixed normalization constants shared by dataset generation, training, and
// online inference.
constexpr double kPosScale = 500.0;
constexpr double kLatScale = 10.0;
constexpr double kRelScale = 50.0;
constexpr double kSpeedScale = 30.0;
constexpr double kHeadingScale = 0.5;
}  // namespace

NeighborFeatures build_neighbor_features(VehicleId sv_id,
                                         const std::vector<VehicleId>& hv_ids,
                                         const StateHistory& history, int t_in) {
  NeighborFeatures out;
  out.sv_id = sv_id;
  out.t_in = t_in;
  if (history.empty()) return out;

  for (VehicleId hv : hv_ids) {
    const WorldSnapshot& newest = history.at_lag(0);
    if (newest.find(hv) == newest.end() || newest.find(sv_id) == newest.end()) {
      continue;
    }
    // Collect newest-to-oldest until either vehicle drops out of the record.
    std::vector<Eigen::Vector2d> abs_r, rel_r;
    std::vector<double> spd_r, head_r;
    std::vector<int> intent_r;
    const int lags = std::min(t_in, history.size());
    for (int lag = 0; lag < lags; ++lag) {
      const WorldSnapshot& snap = history.at_lag(lag);
      auto it_hv = snap.find(hv);
      auto it_sv = snap.find(sv_id);
      if (it_hv == snap.end() || it_sv == snap.end()) break;
      const VehicleState& h = it_hv->second.state;
      const VehicleState& s = it_sv->second.state;
      abs_r.emplace_back(h.px, h.py);
      rel_r.emplace_back(h.px - s.px, h.py - s.py);
      spd_r.push_back(h.speed);
      head_r.push_back(h.heading);
      intent_r.push_back(it_hv->second.lc_intent ? 1 : 0);
    }
    HvFeatureSeries series;
    series.id = hv;
    series.padded = static_cast<int>(abs_r.size()) < t_in;
    // Reverse into time order and pad by repeating the oldest sample.
    const int have = static_cast<int>(abs_r.size());
    const int pad = t_in - have;
    for (int i = 0; i < pad; ++i) {
      series.abs_pos.push_back(abs_r.back());
      series.rel_pos.push_back(rel_r.back());
      series.speed.push_back(spd_r.back());
      series.heading.push_back(head_r.back());
      series.lc_intent.push_back(intent_r.back());
    }
    for (int i = have - 1; i >= 0; --i) {
      series.abs_pos.push_back(abs_r[i]);
      series.rel_pos.push_back(rel_r[i]);
      series.speed.push_back(spd_r[i]);
      series.heading.push_back(head_r[i]);
      series.lc_intent.push_back(intent_r[i]);
    }
    out.hvs.push_back(std::move(series));
  }
  return out;
}

PredictedTrajectories predict_constant_velocity(const NeighborFeatures& features,
                                                int horizon, double dt) {
  if (horizon < 1) {
    throw std::invalid_argument("predict_constant_velocity: horizon must be >= 1");
  }
  PredictedTrajectories out;
  for (const auto& hv : features.hvs) {
    const Eigen::Vector2d p0 = hv.abs_pos.back();
    const double v = hv.speed.back();
    const double psi = hv.heading.back();
    std::vector<Eigen::Vector2d> traj;
    traj.reserve(horizon);
    for (int h = 1; h <= horizon; ++h) {
      traj.emplace_back(p0.x() + h * dt * v, p0.y() + h * dt * v * psi);
    }
    out.positions.emplace(hv.id, std::move(traj));
  }
  return out;
}

PredictedTrajectories predict_idm_rollout(const NeighborFeatures& features,
                                          const std::vector<RolloutVehicle>& context,
                                          int horizon, double dt,
                                          const IdmParams& nominal) {
  std::map<VehicleId, int> index;
  for (size_t i = 0; i < context.size(); ++i) index[context[i].id] = static_cast<int>(i);

  std::vector<double> px, v;
  for (const auto& c : context) {
    px.push_back(c.px);
    v.push_back(c.speed);
  }

  std::map<VehicleId, std::vector<Eigen::Vector2d>> trajs;
  for (const auto& hv : features.hvs) {
    if (index.count(hv.id)) trajs[hv.id] = {};
  }

  for (int h = 0; h < horizon; ++h) {
    std::vector<double> accel(context.size(), 0.0);
    for (size_t i = 0; i < context.size(); ++i) {
      double gap = std::numeric_limits<double>::infinity();
      double dv = 0.0;
      if (context[i].leader) {
        auto it = index.find(*context[i].leader);
        if (it != index.end()) {
          const int li = it->second;
          gap = px[li] - px[i] - context[i].body_length;
          dv = v[i] - v[li];
        }
      }
      accel[i] = (gap > 0.0) ? idm_acceleration(v[i], gap, dv, nominal)
                             : -nominal.a_hard;
    }
    for (size_t i = 0; i < context.size(); ++i) {
      px[i] += dt * v[i];
      v[i] = std::max(0.0, v[i] + dt * accel[i]);
    }
    for (auto& [id, traj] : trajs) {
      const int i = index[id];
      traj.emplace_back(px[i], context[i].py);
    }
  }

  PredictedTrajectories out;
  out.positions = std::move(trajs);
  return out;
}

int predictor_feature_dim(int t_in) { return 7 * t_in + 4; }

Eigen::VectorXd predictor_feature_vector(const HvFeatureSeries& series,
                                         const NeighborFeatures& context) {
  const int T = static_cast<int>(series.speed.size());
  Eigen::VectorXd f(predictor_feature_dim(T));
  int k = 0;
  for (int t = 0; t < T; ++t) f(k++) = series.abs_pos[t].x() / kPosScale;
  for (int t = 0; t < T; ++t) f(k++) = series.abs_pos[t].y() / kLatScale;
  for (int t = 0; t < T; ++t) f(k++) = series.rel_pos[t].x() / kRelScale;
  for (int t = 0; t < T; ++t) f(k++) = series.rel_pos[t].y() / kRelScale;
  for (int t = 0; t < T; ++t) f(k++) = series.speed[t] / kSpeedScale;
  for (int t = 0; t < T; ++t) f(k++) = series.heading[t] / kHeadingScale;
  for (int t = 0; t < T; ++t) f(k++) = static_cast<double>(series.lc_intent[t]);
  // Neighborhood summary over the other HVs at the newest step.
  double sum_dx = 0, sum_dy = 0, sum_v = 0;
  int n_others = 0;
  for (const auto& other : context.hvs) {
    if (other.id == series.id) continue;
    sum_dx += other.abs_pos.back().x() - series.abs_pos.back().x();
    sum_dy += other.abs_pos.back().y() - series.abs_pos.back().y();
    sum_v += other.speed.back();
    ++n_others;
  }
  f(k++) = n_others > 0 ? sum_dx / n_others / kRelScale : 0.0;
  f(k++) = n_others > 0 ? sum_dy / n_others / kRelScale : 0.0;
  f(k++) = n_others > 0 ? sum_v / n_others / kSpeedScale : 0.0;
  f(k++) = n_others / 4.0;
  return f;
}

PredictorModel make_predictor_model(const PredictorConfig& cfg, int horizon,
                                    double dt) {
  PredictorModel m;
  m.t_in = cfg.t_in;
  m.horizon = horizon;
  m.dt = dt;
  std::vector<int> dims;
  dims.push_back(predictor_feature_dim(cfg.t_in));
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(2 * horizon);
  m.net = Mlp(dims);
  return m;
}

PredictorModel train_predictor(const std::vector<PredictorSample>& dataset,
                               const PredictorConfig& cfg, int horizon,
                               double dt, std::uint64_t seed) {
  if (dataset.empty()) {
    throw std::invalid_argument("train_predictor: empty dataset");
  }
  const int d = static_cast<int>(dataset.front().features.size());
  const int out_dim = 2 * horizon;
  for (const auto& s : dataset) {
    if (s.features.size() != d || s.label.size() != out_dim) {
      throw std::invalid_argument("train_predictor: inconsistent sample shapes");
    }
  }
  if (d != predictor_feature_dim(cfg.t_in)) {
    throw std::invalid_argument("train_predictor: feature dim does not match t_in");
  }

  PredictorModel model = make_predictor_model(cfg, horizon, dt);
  RngStream init_rng(seed, "predictor_init");
  model.net.init_random(init_rng);

  const int n = static_cast<int>(dataset.size());
  Eigen::MatrixXd X(d, n), Y(out_dim, n);
  for (int i = 0; i < n; ++i) {
    X.col(i) = dataset[i].features;
    Y.col(i) = dataset[i].label;
  }

  Adam opt(model.net.param_count(), cfg.learning_rate);
  RngStream shuffle_rng(seed, "predictor_shuffle");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const int bs = std::min(cfg.minibatch, n);
  Eigen::VectorXd grad(model.net.param_count());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the deterministic stream.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < n; start += bs) {
      const int b = std::min(bs, n - start);
      Eigen::MatrixXd xb(d, b), yb(out_dim, b);
      for (int i = 0; i < b; ++i) {
        xb.col(i) = X.col(order[start + i]);
        yb.col(i) = Y.col(order[start + i]);
      }
      Mlp::Trace trace;
      Eigen::MatrixXd pred = model.net.forward(xb, trace);
      Eigen::MatrixXd dy = 2.0 * (pred - yb) / b;
      grad.setZero();
      model.net.backward(trace, dy, grad);
      Eigen::VectorXd p = model.net.params() + opt.step(grad);
      model.net.set_params(p);
    }
  }
  model.final_train_loss = (model.net.forward(X) - Y).colwise().squaredNorm().mean();
  return model;
}

PredictedTrajectories predict_learned(const PredictorModel& model,
                                      const NeighborFeatures& features,
                                      int horizon) {
  if (horizon != model.horizon) {
    throw std::invalid_argument("predict_learned: horizon mismatch");
  }
  PredictedTrajectories out;
  for (const auto& hv : features.hvs) {
    Eigen::VectorXd f = predictor_feature_vector(hv, features);
    Eigen::VectorXd y = model.net.forward(f);
    const Eigen::Vector2d p0 = hv.abs_pos.back();
    std::vector<Eigen::Vector2d> traj;
    traj.reserve(horizon);
    Eigen::Vector2d prev = p0;
    for (int h = 0; h < horizon; ++h) {
      Eigen::Vector2d target(p0.x() + y(2 * h), p0.y() + y(2 * h + 1));
      Eigen::Vector2d delta = target - prev;
      const double norm = delta.norm();
      if (norm > model.max_step_disp) delta *= model.max_step_disp / norm;
      prev += delta;
      traj.push_back(prev);
    }
    out.positions.emplace(hv.id, std::move(traj));
  }
  return out;
}

void PredictorModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictor model '" + path + "'");
  out.precision(17);
  out << "weavesim-predictor v1\n";
  out << t_in << " " << horizon << " " << dt << " " << max_step_disp << " "
      << final_train_loss << "\n";
  const auto& dims = net.dims();
  out << dims.size();
  for (int d : dims) out << " " << d;
  out << "\n";
  const Eigen::VectorXd p = net.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out << p(i) << (i + 1 == p.size() ? '\n' : ' ');
  }
}

PredictorModel PredictorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictor model '" + path + "'");
  std::string magic, version;
  in >> magic >> version;
  if (magic != "weavesim-predictor" || version != "v1") {
    throw std::runtime_error("unrecognized predictor model format");
  }
  PredictorModel m;
  in >> m.t_in >> m.horizon >> m.dt >> m.max_step_disp >> m.final_train_loss;
  size_t n_dims = 0;
  in >> n_dims;
  std::vector<int> dims(n_dims);
  for (auto& d : dims) in >> d;
  m.net = Mlp(dims);
  Eigen::VectorXd p(m.net.param_count());
  for (Eigen::Index i = 0; i < p.size(); ++i) in >> p(i);
  if (!in) throw std::runtime_error("truncated predictor model file");
  m.net.set_params(p);
  return m;
}

void save_dataset(const std::vector<PredictorSample>& samples,
                  const std::string& path, int t_in, int horizon, double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  out.precision(17);
  const int d = samples.empty() ? predictor_feature_dim(t_in)
                                : static_cast<int>(samples.front().features.size());
  out << "# weavesim predictor dataset v1\n";
  out << "# feature_dim " << d << " label_dim " << 2 * horizon << " t_in "
      << t_in << " horizon " << horizon << " dt " << dt << "\n";
  for (const auto& s : samples) {
    for (Eigen::Index i = 0; i < s.features.size(); ++i) out << s.features(i) << " ";
    for (Eigen::Index i = 0; i < s.label.size(); ++i) {
      out << s.label(i) << (i + 1 == s.label.size() ? '\n' : ' ');
    }
  }
}

std::vector<PredictorSample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  int feature_dim = -1, label_dim = -1;
  std::vector<PredictorSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string tok;
      while (hs >> tok) {
        if (tok == "feature_dim") hs >> feature_dim;
        if (tok == "label_dim") hs >> label_dim;
      }
      continue;
    }
    if (feature_dim < 0 || label_dim < 0) {
      throw std::runtime_error("dataset missing dimension header");
    }
    std::istringstream ls(line);
    PredictorSample s;
    s.features.resize(feature_dim);
    s.label.resize(label_dim);
    for (int i = 0; i < feature_dim; ++i) ls >> s.features(i);
    for (int i = 0; i < label_dim; ++i) ls >> s.label(i);
    if (!ls) throw std::runtime_error("malformed dataset record");
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace weavesim
