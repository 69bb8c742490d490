#include <algorithm>
#include <fstream>

#include <gtest/gtest.h>

#include "epflow/config.hpp"

using namespace epflow::cli;

namespace {

const char* kMinimalRigidbody = R"({"schema_version": 1, "experiment": "rigidbody"})";

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST(ParseConfig, MinimalRigidbodyUsesDefaults) {
  const auto c = parse_config(kMinimalRigidbody);
  EXPECT_EQ(c.experiment, Experiment::Rigidbody);
  EXPECT_EQ(c.integrator.scheme, "midpoint");
  EXPECT_EQ(c.integrator.dt, 1e-3);
  EXPECT_EQ(c.ensemble.members, 1);
  EXPECT_EQ(c.noise.kind, "so3-axis");
  EXPECT_EQ(c.rigidbody.inertia, (std::vector<double>{1.0, 1.0, 2.0}));
  EXPECT_EQ(c.output.formats, (std::vector<std::string>{"csv"}));
}

TEST(ParseConfig, FormatDefaultsPerExperiment) {
  const auto h = parse_config(R"({"schema_version": 1, "experiment": "homog", "ensemble": {"members": 10}})");
  EXPECT_TRUE(h.output.wants("csv"));
  EXPECT_TRUE(h.output.wants("jsonl"));
  const auto e = parse_config(R"({"schema_version": 1, "experiment": "euler2d"})");
  EXPECT_TRUE(e.output.wants("bin"));
  EXPECT_FALSE(e.output.wants("jsonl"));
}

TEST(ParseConfig, NegativeStepNamesTheField) {
  const auto errors = errors_of(R"({"schema_version": 1, "experiment": "rigidbody", "integrator": {"dt": -1}})");
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_NE(errors[0].find("integrator.dt"), std::string::npos);
}

TEST(ParseConfig, UnknownKeysRejected) {
  const auto errors = errors_of(R"({"schema_version": 1, "experiment": "rigidbody", "integrator": {"dtt": 0.1}, "extra": 1})");
  EXPECT_TRUE(mentions(errors, "integrator.dtt: unknown key"));
  EXPECT_TRUE(mentions(errors, "extra: unknown key"));
}

TEST(ParseConfig, MissingRequiredKeysListed) {
  const auto errors = errors_of("{}");
  EXPECT_TRUE(mentions(errors, "schema_version: required key is missing"));
  EXPECT_TRUE(mentions(errors, "experiment: required key is missing"));
}

TEST(ParseConfig, CollectsEveryError) {
  const auto errors = errors_of(R"({
    "schema_version": 1, "experiment": "rigidbody",
    "integrator": {"dt": -1, "T": 0, "scheme": "rk4"},
    "ensemble": {"members": 0},
    "rigidbody": {"inertia": [1, -2, 3], "pi0": [1, 2]}
  })");
  EXPECT_GE(errors.size(), 6u);
  for (const char* field : {"integrator.dt", "integrator.T", "integrator.scheme", "ensemble.members",
                            "rigidbody.inertia", "rigidbody.pi0"}) {
    EXPECT_TRUE(mentions(errors, field)) << field;
  }
}

TEST(ParseConfig, TypeErrorsAndBadDocuments) {
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "rigidbody", "ensemble": {"members": 1.5}})"),
                       "ensemble.members"));
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 2, "experiment": "rigidbody"})"), "schema_version"));
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "fluid"})"), "experiment"));
  EXPECT_FALSE(errors_of("{not json").empty());
}

TEST(ParseConfig, NoiseValidation) {
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "rigidbody",
      "noise": {"kind": "torus-constant", "vectors": [[1, 0]]}})"), "noise.kind"));
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "rigidbody",
      "noise": {"kind": "so3-axis", "axes": [[1, 0, 0], [0, 1, 0]], "gamma": {"source": "explicit", "matrix": [[0, 1], [1, 0]]}}})"),
                       "antisymmetric"));
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "vortex",
      "noise": {"kind": "planar-killing", "decay": -1}, "vortex": {"triangle_radius": 0.5}})"), "noise.decay"));
  EXPECT_TRUE(mentions(errors_of(R"({"schema_version": 1, "experiment": "rigidbody",
      "noise": {"kind": "so3-axis", "gamma": {"source": "estimated"}}})"), "estimated"));
}

TEST(ParseConfig, HomogValidation) {
  const auto errors = errors_of(R"({"schema_version": 1, "experiment": "homog",
      "ensemble": {"members": 1},
      "homog": {"epsilons": [1.5], "alpha": 2}})");
  EXPECT_TRUE(mentions(errors, "homog.epsilons"));
  EXPECT_TRUE(mentions(errors, "homog.alpha"));
  EXPECT_TRUE(mentions(errors, "ensemble.members"));
}

TEST(ParseConfig, SampleConfigsParse) {
  for (const char* name : {"rigidbody", "vortex", "euler2d", "homog_ou", "homog_lorenz"}) {
    const std::string path = std::string(EPFLOW_CONFIG_DIR) + "/" + name + ".json";
    EXPECT_NO_THROW(load_config(path)) << path;
  }
  EXPECT_THROW(load_config("/nonexistent/epflow.json"), ConfigError);
}

TEST(Serialise, RoundTripGivesEqualConfig) {
  for (const char* name : {"rigidbody", "vortex", "euler2d", "homog_ou", "homog_lorenz"}) {
    const auto c = load_config(std::string(EPFLOW_CONFIG_DIR) + "/" + name + ".json");
    const auto back = parse_config(serialise(c));
    EXPECT_TRUE(back == c) << name;
    EXPECT_EQ(serialise(back), serialise(c)) << name;
  }
}

TEST(ConfigHash, StableAcrossReserialisation) {
  const auto a = parse_config(R"({"schema_version": 1, "experiment": "rigidbody", "integrator": {"dt": 0.01, "T": 1}})");
  const auto b = parse_config(R"({"integrator": {"T": 1.0, "dt": 1e-2},   "experiment": "rigidbody", "schema_version": 1})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a), config_hash(parse_config(serialise(a))));
  EXPECT_EQ(config_hash(a).size(), 16u);
  auto c = a;
  c.ensemble.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_FALSE(a == c);
}

TEST(BuildNoise, MatchesBlock) {
  const auto c = parse_config(R"({"schema_version": 1, "experiment": "rigidbody",
      "noise": {"kind": "so3-axis", "axes": [[1, 0, 0], [0, 1, 0]], "gamma": {"source": "explicit", "matrix": [[0, 0.5], [-0.5, 0]]}}})");
  const auto basis = build_noise(c.noise);
  EXPECT_EQ(basis.kind(), epflow::noise::NoiseKind::So3Axis);
  EXPECT_EQ(basis.size(), 2);
  EXPECT_EQ(basis.gamma()(0, 1), 0.5);
}

TEST(Experiment, NamesRoundTrip) {
  for (auto e : {Experiment::Homog, Experiment::Rigidbody, Experiment::Vortex, Experiment::Euler2d}) {
    EXPECT_EQ(experiment_from_string(to_string(e)), e);
  }
  EXPECT_THROW(experiment_from_string("plots"), std::invalid_argument);
}
