#include "epflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace epflow::cli {

using json = nlohmann::json;

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Homog: return "homog";
    case Experiment::Rigidbody: return "rigidbody";
    case Experiment::Vortex: return "vortex";
    case Experiment::Euler2d: return "euler2d";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  if (name == "homog") return Experiment::Homog;
  if (name == "rigidbody") return Experiment::Rigidbody;
  if (name == "vortex") return Experiment::Vortex;
  if (name == "euler2d") return Experiment::Euler2d;
  throw std::invalid_argument("unknown experiment '" + name + "' (expected homog, rigidbody, vortex or euler2d)");
}

bool OutputBlock::wants(const std::string& f) const {
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw std::invalid_argument("rows have different lengths");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

json from_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

/// Typed access to one JSON object that remembers which keys were read.
class Reader {
 public:
  Reader(const json* node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ != nullptr && !node_->is_object()) {
      errors_.push_back(path_ + ": expected an object");
      node_ = nullptr;
    }
  }

  bool present() const { return node_ != nullptr; }
  bool has(const char* key) const { return node_ != nullptr && node_->contains(key); }

  template <class T>
  void get(const char* key, T& out, bool required = false) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) errors_.push_back(name(key) + ": required key is missing");
      return;
    }
    try {
      out = convert<T>(node_->at(key));
    } catch (const std::exception& e) {
      errors_.push_back(name(key) + ": " + clean(e.what()));
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(has(key) ? &node_->at(key) : nullptr, name(key), errors_);
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (seen_.count(it.key()) == 0) errors_.push_back(name(it.key().c_str()) + ": unknown key");
    }
  }

  std::string name(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

 private:
  static std::string clean(const std::string& what) {
    // strip nlohmann's "[json.exception.type_error.302] " prefix
    const auto pos = what.find("] ");
    return pos == std::string::npos ? what : what.substr(pos + 2);
  }

  template <class T>
  static T convert(const json& j) {
    if constexpr (std::is_same_v<T, Eigen::MatrixXd>) {
      return to_matrix(j.get<std::vector<std::vector<double>>>());
    } else if constexpr (std::is_same_v<T, std::vector<Eigen::MatrixXd>>) {
      std::vector<Eigen::MatrixXd> out;
      for (const auto& m : j.get<std::vector<std::vector<std::vector<double>>>>()) out.push_back(to_matrix(m));
      return out;
    } else if constexpr (std::is_same_v<T, int>) {
      if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
      const auto v = j.get<long long>();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) throw std::invalid_argument("integer out of range");
      return static_cast<int>(v);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      return j.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw std::invalid_argument("expected a number");
      return j.get<double>();
    } else {
      return j.get<T>();
    }
  }

  const json* node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void default_noise(RunConfig& c) {
  NoiseBlock& n = c.noise;
  switch (c.experiment) {
    case Experiment::Rigidbody:
      n.kind = "so3-axis";
      n.vectors = {{0.0, 0.0, 1.0}};
      break;
    case Experiment::Vortex:
      n.kind = "planar-killing";
      break;
    case Experiment::Euler2d:
      n.kind = "torus-constant";
      n.vectors = {{0.1, 0.0}, {0.0, 0.1}};
      break;
    case Experiment::Homog:
      n.kind = "torus-constant";
      n.vectors = {{1.0}};
      break;
  }
}

int noise_size(const NoiseBlock& n) {
  if (n.kind == "planar-killing") return 2;
  if (n.kind == "custom-linear") return static_cast<int>(n.matrices.size());
  return static_cast<int>(n.vectors.size());
}

void validate(const RunConfig& c, const Reader& noise_reader, std::vector<std::string>& errors) {
  const auto& in = c.integrator;
  if (!(in.dt > 0.0)) errors.push_back("integrator.dt: must be positive");
  if (!(in.T > 0.0)) errors.push_back("integrator.T: must be positive");
  if (in.dt > 0.0 && in.T > 0.0) {
    const double steps = in.T / in.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) errors.push_back("integrator.T: must be a whole number of steps dt");
  }
  if (!(in.tol > 0.0)) errors.push_back("integrator.tol: must be positive");
  if (in.max_iter < 1) errors.push_back("integrator.max_iter: must be at least 1");
  const bool scheme_ok = in.scheme == "heun" || in.scheme == "midpoint" ||
                         (in.scheme == "split" && c.experiment == Experiment::Vortex);
  if (!scheme_ok) errors.push_back("integrator.scheme: '" + in.scheme + "' is not available for " + to_string(c.experiment));
  if (c.ensemble.members < 1) errors.push_back("ensemble.members: must be at least 1");

  // noise
  const NoiseBlock& n = c.noise;
  const std::string np = "noise";
  static const std::set<std::string> kinds{"so3-axis", "torus-constant", "planar-killing", "custom-linear"};
  if (kinds.count(n.kind) == 0) {
    errors.push_back(np + ".kind: unknown kind '" + n.kind + "'");
  } else {
    std::set<std::string> allowed;
    switch (c.experiment) {
      case Experiment::Rigidbody: allowed = {"so3-axis", "custom-linear"}; break;
      case Experiment::Vortex: allowed = {"planar-killing"}; break;
      case Experiment::Euler2d: allowed = {"torus-constant"}; break;
      case Experiment::Homog: allowed = {"torus-constant", "so3-axis", "custom-linear"}; break;
    }
    if (allowed.count(n.kind) == 0) {
      errors.push_back(np + ".kind: '" + n.kind + "' is not available for " + to_string(c.experiment));
    }
    if (n.kind == "so3-axis" || n.kind == "torus-constant") {
      if (n.vectors.empty()) errors.push_back(np + ".vectors: at least one field is required");
      for (std::size_t k = 0; k < n.vectors.size(); ++k) {
        const std::size_t want = n.kind == "so3-axis" ? 3 : n.vectors.front().size();
        if (n.vectors[k].size() != want || want == 0) {
          errors.push_back(np + ".vectors[" + std::to_string(k) + "]: expected " + std::to_string(want) + " entries");
        }
      }
      if (c.experiment == Experiment::Euler2d && !n.vectors.empty() && n.vectors.front().size() != 2) {
        errors.push_back(np + ".vectors: euler2d fields must be two-dimensional");
      }
    }
    if (n.kind == "custom-linear") {
      if (n.matrices.empty()) errors.push_back(np + ".matrices: at least one matrix is required");
      for (std::size_t k = 0; k < n.matrices.size(); ++k) {
        const auto& m = n.matrices[k];
        if (m.rows() == 0 || m.rows() != m.cols() || m.rows() != n.matrices.front().rows()) {
          errors.push_back(np + ".matrices[" + std::to_string(k) + "]: expected square matrices of equal size");
        }
      }
    }
    if (n.kind == "planar-killing" && n.decay < 0.0) errors.push_back(np + ".decay: must be non-negative");
    if (n.kind != "planar-killing") {
      for (const char* key : {"amplitude", "decay", "a", "b"}) {
        if (noise_reader.has(key)) errors.push_back(np + "." + key + ": only used by planar-killing noise");
      }
    }
    if (n.kind == "custom-linear" && !n.vectors.empty()) errors.push_back(np + ".vectors: not used by custom-linear noise");
    if (n.kind != "custom-linear" && !n.matrices.empty()) errors.push_back(np + ".matrices: only used by custom-linear noise");
  }
  const std::string& src = n.gamma.source;
  if (src != "zero" && src != "explicit" && src != "estimated") {
    errors.push_back("noise.gamma.source: expected zero, explicit or estimated");
  } else if (src == "estimated" && c.experiment != Experiment::Homog) {
    errors.push_back("noise.gamma.source: 'estimated' is only available for homog");
  } else if (src == "explicit") {
    const int k = noise_size(n);
    const auto& g = n.gamma.matrix;
    if (g.rows() != k || g.cols() != k) {
      errors.push_back("noise.gamma.matrix: expected " + std::to_string(k) + " x " + std::to_string(k));
    } else if ((g + g.transpose()).cwiseAbs().maxCoeff() != 0.0) {
      errors.push_back("noise.gamma.matrix: must be exactly antisymmetric");
    }
  } else if (n.gamma.matrix.size() != 0) {
    errors.push_back("noise.gamma.matrix: only used with source 'explicit'");
  }

  switch (c.experiment) {
    case Experiment::Homog: {
      const auto& h = c.homog;
      int k = 0;
      if (h.fast == "ou-surrogate") {
        if (!(h.ou_rate > 0.0)) errors.push_back("homog.ou_rate: must be positive");
        const auto& cov = h.ou_covariance;
        if (cov.rows() == 0 || cov.rows() != cov.cols()) {
          errors.push_back("homog.ou_covariance: expected a square matrix");
        } else if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
                   Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().minCoeff() <= 0.0) {
          errors.push_back("homog.ou_covariance: must be symmetric positive definite");
        }
        k = static_cast<int>(cov.rows());
      } else if (h.fast == "lorenz63") {
        k = 2;
        if (!(h.calibration_time > 0.0)) errors.push_back("homog.calibration_time: must be positive");
        if (h.burn_in < 0.0) errors.push_back("homog.burn_in: must be non-negative");
      } else {
        errors.push_back("homog.fast: expected ou-surrogate or lorenz63");
      }
      if (!(h.base_step > 0.0)) errors.push_back("homog.base_step: must be positive");
      if (h.epsilons.size() < 2) errors.push_back("homog.epsilons: at least two values are required");
      for (double e : h.epsilons) {
        if (!(e > 0.0 && e <= 1.0)) errors.push_back("homog.epsilons: values must lie in (0, 1]");
      }
      if (h.slow_steps < 1) errors.push_back("homog.slow_steps: must be at least 1");
      if (c.ensemble.members < 2) errors.push_back("ensemble.members: homog needs at least 2");
      if (!(h.alpha > 0.0 && h.alpha < 1.0)) errors.push_back("homog.alpha: must lie in (0, 1)");
      if (k > 0 && noise_size(n) != k) {
        errors.push_back("noise: homog needs K = " + std::to_string(k) + " fields to match the fast observable");
      }
      int dim = 0;
      if (n.kind == "torus-constant" && !n.vectors.empty()) dim = static_cast<int>(n.vectors.front().size());
      if (n.kind == "so3-axis") dim = 3;
      if (n.kind == "custom-linear" && !n.matrices.empty()) dim = static_cast<int>(n.matrices.front().rows());
      if (dim > 0 && static_cast<int>(h.x0.size()) != dim) {
        errors.push_back("homog.x0: expected " + std::to_string(dim) + " entries");
      }
      if (h.mean_velocity != "zero" && h.mean_velocity != "constant" && h.mean_velocity != "shear") {
        errors.push_back("homog.mean_velocity: expected zero, constant or shear");
      } else if (h.mean_velocity != "zero" && n.kind != "torus-constant") {
        errors.push_back("homog.mean_velocity: composition needs torus-constant noise");
      } else if (h.mean_velocity == "constant" && static_cast<int>(h.mean_vector.size()) != dim) {
        errors.push_back("homog.mean_vector: expected " + std::to_string(dim) + " entries");
      } else if (h.mean_velocity == "shear" && dim < 2) {
        errors.push_back("homog.mean_velocity: shear needs at least two dimensions");
      }
      break;
    }
    case Experiment::Rigidbody: {
      const auto& r = c.rigidbody;
      if (r.inertia.size() != 3) {
        errors.push_back("rigidbody.inertia: expected 3 entries");
      } else {
        for (double v : r.inertia) {
          if (!(v > 0.0)) errors.push_back("rigidbody.inertia: entries must be positive");
        }
      }
      if (r.pi0.size() != 3) errors.push_back("rigidbody.pi0: expected 3 entries");
      if (r.averaged_members < 0) errors.push_back("rigidbody.averaged_members: must be non-negative");
      if (n.kind == "custom-linear") {
        for (const auto& m : n.matrices) {
          if (m.rows() != 3 || m.cols() != 3 || (m + m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            errors.push_back("noise.matrices: rigidbody needs skew-symmetric 3 x 3 matrices");
            break;
          }
        }
      }
      break;
    }
    case Experiment::Vortex: {
      const auto& v = c.vortex;
      if (v.triangle_radius > 0.0) {
        if (!v.positions.empty() || !v.strengths.empty()) {
          errors.push_back("vortex: give either triangle_radius or positions/strengths, not both");
        }
      } else if (v.positions.empty()) {
        errors.push_back("vortex.positions: required unless triangle_radius is set");
      } else {
        if (v.positions.size() != v.strengths.size()) errors.push_back("vortex.strengths: one strength per position");
        for (std::size_t a = 0; a < v.positions.size(); ++a) {
          if (v.positions[a].size() != 2) errors.push_back("vortex.positions[" + std::to_string(a) + "]: expected 2 entries");
        }
      }
      if (v.triangle_radius < 0.0) errors.push_back("vortex.triangle_radius: must be non-negative");
      break;
    }
    case Experiment::Euler2d: {
      const auto& e = c.euler2d;
      if (e.n < 8 || e.n % 2 != 0) errors.push_back("euler2d.n: must be even and at least 8");
      if (e.initial != "cos-x" && e.initial != "two-mode" && e.initial != "triad") {
        errors.push_back("euler2d.initial: expected cos-x, two-mode or triad");
      }
      if (e.loop_markers != 0 && e.loop_markers < 3) errors.push_back("euler2d.loop_markers: 0 or at least 3");
      if (!(e.loop_radius > 0.0)) errors.push_back("euler2d.loop_radius: must be positive");
      if (e.loop_center.size() != 2) errors.push_back("euler2d.loop_center: expected 2 entries");
      if (e.dt_det < 0.0) errors.push_back("euler2d.dt_det: must be non-negative");
      if (e.dt_det > 0.0 && in.dt > 0.0) {
        const double r = in.dt / e.dt_det;
        if (std::abs(r - std::round(r)) > 1e-9 * r) errors.push_back("euler2d.dt_det: must divide integrator.dt");
      }
      if (e.snapshot_stride < 0) errors.push_back("euler2d.snapshot_stride: must be non-negative");
      break;
    }
  }

  if (c.output.stride < 1) errors.push_back("output.stride: must be at least 1");
  if (c.output.directory.empty()) errors.push_back("output.directory: must not be empty");
  for (const auto& f : c.output.formats) {
    if (f != "csv" && f != "jsonl" && f != "bin") errors.push_back("output.formats: unknown format '" + f + "'");
  }
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = to_string(c.experiment);
  j["integrator"] = {{"scheme", c.integrator.scheme},
                     {"dt", c.integrator.dt},
                     {"T", c.integrator.T},
                     {"tol", c.integrator.tol},
                     {"max_iter", c.integrator.max_iter}};
  j["ensemble"] = {{"members", c.ensemble.members}, {"seed", c.ensemble.seed}};

  json noise;
  noise["kind"] = c.noise.kind;
  if (c.noise.kind == "planar-killing") {
    noise["amplitude"] = c.noise.amplitude;
    noise["decay"] = c.noise.decay;
    noise["a"] = c.noise.a;
    noise["b"] = c.noise.b;
  } else if (c.noise.kind == "custom-linear") {
    json ms = json::array();
    for (const auto& m : c.noise.matrices) ms.push_back(from_matrix(m));
    noise["matrices"] = ms;
  } else {
    noise["vectors"] = c.noise.vectors;
  }
  noise["gamma"] = {{"source", c.noise.gamma.source}};
  if (c.noise.gamma.source == "explicit") noise["gamma"]["matrix"] = from_matrix(c.noise.gamma.matrix);
  j["noise"] = noise;

  switch (c.experiment) {
    case Experiment::Homog: {
      const auto& h = c.homog;
      json b = {{"fast", h.fast},
                {"base_step", h.base_step},
                {"epsilons", h.epsilons},
                {"slow_steps", h.slow_steps},
                {"x0", h.x0},
                {"mean_velocity", h.mean_velocity},
                {"couple_limit", h.couple_limit},
                {"alpha", h.alpha}};
      if (h.fast == "ou-surrogate") {
        b["ou_rate"] = h.ou_rate;
        b["ou_covariance"] = from_matrix(h.ou_covariance);
      } else {
        b["burn_in"] = h.burn_in;
        b["calibration_time"] = h.calibration_time;
      }
      if (h.mean_velocity == "constant") b["mean_vector"] = h.mean_vector;
      if (h.mean_velocity == "shear") b["mean_amplitude"] = h.mean_amplitude;
      j["homog"] = b;
      break;
    }
    case Experiment::Rigidbody:
      j["rigidbody"] = {{"inertia", c.rigidbody.inertia},
                        {"pi0", c.rigidbody.pi0},
                        {"averaged_members", c.rigidbody.averaged_members}};
      break;
    case Experiment::Vortex:
      if (c.vortex.triangle_radius > 0.0) {
        j["vortex"] = {{"triangle_radius", c.vortex.triangle_radius}};
      } else {
        j["vortex"] = {{"positions", c.vortex.positions}, {"strengths", c.vortex.strengths}};
      }
      break;
    case Experiment::Euler2d:
      j["euler2d"] = {{"n", c.euler2d.n},
                      {"initial", c.euler2d.initial},
                      {"loop_markers", c.euler2d.loop_markers},
                      {"loop_radius", c.euler2d.loop_radius},
                      {"loop_center", c.euler2d.loop_center},
                      {"dt_det", c.euler2d.dt_det},
                      {"snapshot_stride", c.euler2d.snapshot_stride}};
      break;
  }
  j["output"] = {{"directory", c.output.directory}, {"stride", c.output.stride}, {"formats", c.output.formats}};
  return j;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors) : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("document is not valid JSON: ") + e.what()});
  }
  std::vector<std::string> errors;
  RunConfig c;
  Reader root(&doc, "", errors);
  if (!root.present()) throw ConfigError(errors);

  root.get("schema_version", c.schema_version, true);
  if (root.has("schema_version") && c.schema_version != kSchemaVersion) {
    errors.push_back("schema_version: unsupported version " + std::to_string(c.schema_version) + " (expected " +
                     std::to_string(kSchemaVersion) + ")");
  }
  std::string experiment;
  root.get("experiment", experiment, true);
  bool experiment_ok = false;
  if (root.has("experiment") && !experiment.empty()) {
    try {
      c.experiment = experiment_from_string(experiment);
      experiment_ok = true;
    } catch (const std::invalid_argument& e) {
      errors.push_back(std::string("experiment: ") + e.what());
    }
  }

  if (experiment_ok) {
    default_noise(c);
    if (c.experiment == Experiment::Homog) {
      c.noise.gamma.source = "estimated";
      c.integrator.scheme = "heun";
      c.output.formats = {"csv", "jsonl"};
    }
    if (c.experiment == Experiment::Euler2d) c.output.formats = {"csv", "bin"};
  }

  Reader integ = root.child("integrator");
  integ.get("scheme", c.integrator.scheme);
  integ.get("dt", c.integrator.dt);
  integ.get("T", c.integrator.T);
  integ.get("tol", c.integrator.tol);
  integ.get("max_iter", c.integrator.max_iter);
  integ.finish();

  Reader ens = root.child("ensemble");
  ens.get("members", c.ensemble.members);
  ens.get("seed", c.ensemble.seed);
  ens.finish();

  Reader noise = root.child("noise");
  if (noise.present() && noise.has("kind")) {
    // an explicit kind starts from empty field data
    c.noise.vectors.clear();
  }
  noise.get("kind", c.noise.kind, noise.present());
  noise.get("vectors", c.noise.vectors);
  noise.get("axes", c.noise.vectors);
  noise.get("matrices", c.noise.matrices);
  noise.get("amplitude", c.noise.amplitude);
  noise.get("decay", c.noise.decay);
  noise.get("a", c.noise.a);
  noise.get("b", c.noise.b);
  if (noise.has("vectors") && noise.has("axes")) errors.push_back("noise: give vectors or axes, not both");
  Reader gamma = noise.child("gamma");
  gamma.get("source", c.noise.gamma.source);
  gamma.get("matrix", c.noise.gamma.matrix);
  gamma.finish();
  noise.finish();

  Reader homog = root.child("homog");
  homog.get("fast", c.homog.fast);
  homog.get("ou_rate", c.homog.ou_rate);
  homog.get("ou_covariance", c.homog.ou_covariance);
  homog.get("base_step", c.homog.base_step);
  homog.get("burn_in", c.homog.burn_in);
  homog.get("calibration_time", c.homog.calibration_time);
  homog.get("epsilons", c.homog.epsilons);
  homog.get("slow_steps", c.homog.slow_steps);
  homog.get("x0", c.homog.x0);
  homog.get("mean_velocity", c.homog.mean_velocity);
  homog.get("mean_vector", c.homog.mean_vector);
  homog.get("mean_amplitude", c.homog.mean_amplitude);
  homog.get("couple_limit", c.homog.couple_limit);
  homog.get("alpha", c.homog.alpha);
  homog.finish();
  if (experiment_ok && c.experiment == Experiment::Homog && c.homog.fast == "lorenz63" && !homog.has("base_step")) {
    c.homog.base_step = 0.005;
  }

  Reader rigid = root.child("rigidbody");
  rigid.get("inertia", c.rigidbody.inertia);
  rigid.get("pi0", c.rigidbody.pi0);
  rigid.get("averaged_members", c.rigidbody.averaged_members);
  rigid.finish();

  Reader vort = root.child("vortex");
  vort.get("positions", c.vortex.positions);
  vort.get("strengths", c.vortex.strengths);
  vort.get("triangle_radius", c.vortex.triangle_radius);
  vort.finish();

  Reader eul = root.child("euler2d");
  eul.get("n", c.euler2d.n);
  eul.get("initial", c.euler2d.initial);
  eul.get("loop_markers", c.euler2d.loop_markers);
  eul.get("loop_radius", c.euler2d.loop_radius);
  eul.get("loop_center", c.euler2d.loop_center);
  eul.get("dt_det", c.euler2d.dt_det);
  eul.get("snapshot_stride", c.euler2d.snapshot_stride);
  eul.finish();

  Reader out = root.child("output");
  out.get("directory", c.output.directory);
  out.get("stride", c.output.stride);
  out.get("formats", c.output.formats);
  out.finish();
  root.finish();

  if (experiment_ok) {
    const std::pair<const char*, Experiment> blocks[] = {{"homog", Experiment::Homog},
                                                          {"rigidbody", Experiment::Rigidbody},
                                                          {"vortex", Experiment::Vortex},
                                                          {"euler2d", Experiment::Euler2d}};
    for (const auto& [key, e] : blocks) {
      if (root.has(key) && e != c.experiment) {
        errors.push_back(std::string(key) + ": block does not apply to experiment " + to_string(c.experiment));
      }
    }
    if (c.experiment == Experiment::Vortex && !root.has("vortex")) {
      errors.push_back("vortex: required block is missing");
    }
    validate(c, noise, errors);
  }
  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

std::string serialise(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

noise::NoiseBasis build_noise(const NoiseBlock& block) {
  noise::NoiseBasis basis = [&] {
    switch (noise::noise_kind_from_string(block.kind)) {
      case noise::NoiseKind::So3Axis: {
        std::vector<Eigen::Vector3d> axes;
        for (const auto& v : block.vectors) axes.emplace_back(v.at(0), v.at(1), v.at(2));
        return noise::NoiseBasis::so3_axis(std::move(axes));
      }
      case noise::NoiseKind::TorusConstant: {
        std::vector<Eigen::VectorXd> vs;
        for (const auto& v : block.vectors) vs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        return noise::NoiseBasis::torus_constant(std::move(vs));
      }
      case noise::NoiseKind::PlanarKilling: {
        noise::PlanarKillingParams p;
        p.amplitude = block.amplitude;
        p.decay = block.decay;
        p.a = block.a;
        p.b = block.b;
        return noise::NoiseBasis::planar_killing(p);
      }
      case noise::NoiseKind::CustomLinear:
        return noise::NoiseBasis::custom_linear(block.matrices);
    }
    throw std::invalid_argument("unknown noise kind");
  }();
  if (block.gamma.source == "explicit") basis = basis.with_gamma(block.gamma.matrix);
  return basis;
}

}  // namespace epflow::cli
