#include <random>

#include "gtest/gtest.h"
#include "nflow/discretize.hpp"
#include "nflow/network.hpp"
#include "nflow/serialize.hpp"
#include "test_support.hpp"

namespace nflow {
namespace {

using testing_support::dense_segment;
using testing_support::random_matrix;
using testing_support::random_path;

TEST(ForwardTest, EmptyLayerListIsLinear) {
  std::mt19937_64 rng(1);
  const Matrix P = random_matrix(rng, 3, 2), R = random_matrix(rng, 1, 3);
  const Network net(NetworkStructure::Plain, ChannelKind::scalar(), 0.0, P, {}, R);
  const Matrix v = random_matrix(rng, 2, 4);
  EXPECT_EQ(forward(net, v), R * (P * v));
}

TEST(ForwardTest, IdentityAffineLayer) {
  std::mt19937_64 rng(2);
  const Matrix P = random_matrix(rng, 3, 2), R = random_matrix(rng, 2, 3);
  const Layer id{LayerKind::Affine, LinearMap{0.0, Matrix(Matrix::Identity(3, 3))}, Matrix::Zero(3, 1), 1.0, 1.0};
  const Network net(NetworkStructure::Plain, ChannelKind::scalar(), 0.0, P, {id}, R);
  const Matrix v = random_matrix(rng, 2, 3);
  EXPECT_LE((forward(net, v) - R * P * v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ForwardTest, SplitExampleEmbedded) {
  const ParamPath p(Structure::Separation, {dense_segment(0.5, Matrix::Zero(1, 1), Vector::Zero(1), 1.0)});
  const Network net = split_plain(p, 0.5, ActivationFamily{0.0})
                          .with_lift_readout(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  Matrix v(1, 2);
  v << -1.0, 1.0;
  const Matrix out = forward(net, v);
  EXPECT_EQ(out(0, 0), -1.0);
  EXPECT_EQ(out(0, 1), 2.0);
}

TEST(ForwardTest, PositiveHomogeneityWithoutBias) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int c = 0; c < 20; ++c) {
    std::vector<ParamSegment> segs = random_path(rng, Structure::Separation, 3, 0.5, {0.2, 0.3}).segments();
    for (auto& s : segs) {
      s.b.setZero();
      s.alpha = std::abs(s.alpha);
    }
    const Network net = split_plain(ParamPath(Structure::Separation, segs), 0.1, ActivationFamily{0.3})
                            .with_lift_readout(random_matrix(rng, 3, 2), random_matrix(rng, 2, 3));
    const Matrix v = random_matrix(rng, 2, 4);
    const double k = scale(rng);
    const Matrix lhs = forward(net, k * v), rhs = k * forward(net, v);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST(ForwardTest, ShapeErrors) {
  const Network net = Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 2, 0.0, {});
  EXPECT_THROW(forward(net, Matrix::Zero(3, 1)), StructuralError);
  const Network g = Network::latent(NetworkStructure::Plain, ChannelKind::grid(4, 1), 2, 0.0, {});
  EXPECT_THROW(forward(g, Matrix::Zero(2, 5)), StructuralError);
  EXPECT_THROW(Network(NetworkStructure::Plain, ChannelKind::scalar(), 0.0, Matrix::Zero(2, 1), {}, Matrix::Zero(1, 3)),
               StructuralError);
}

TEST(ForwardTest, NonFiniteReportsLayer) {
  const Layer big{LayerKind::Affine, LinearMap{0.0, Matrix(Matrix::Constant(1, 1, 1e200))}, Matrix::Zero(1, 1), 1.0, 1.0};
  const Network net = Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 1, 0.0, {big, big, big});
  try {
    forward(net, Matrix::Ones(1, 1));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(SerializeTest, RoundTripIsBitwise) {
  verify::Rng rng(4);
  const auto r = verify::check_model_roundtrip(rng, 100);
  EXPECT_EQ(r.measured, 0.0) << r.detail;
}

TEST(SerializeTest, RoundTripOnManyProbes) {
  std::mt19937_64 rng(5);
  const Network net = compile(random_path(rng, Structure::Separation, 3, 1.0, {0.3, 0.2}), 0.1, ActivationFamily{0.1})
                          .with_lift_readout(random_matrix(rng, 3, 1), random_matrix(rng, 1, 3));
  const Network back = load(save(net));
  const Matrix v = random_matrix(rng, 1, 100, 3.0);
  const Matrix a = forward(net, v), b = forward(back, v);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(SerializeTest, SaveIsDeterministic) {
  std::mt19937_64 rng(6);
  const Network net = compile(random_path(rng, Structure::Composition, 2, 1.0, {0.2}), 0.1, ActivationFamily{0.1});
  EXPECT_EQ(save(net), save(net));
  EXPECT_EQ(save(load(save(net))), save(net));
}

TEST(SerializeTest, TruncatedDocumentIsFormatError) {
  const Network net = Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 2, 0.0, {});
  const std::string doc = save(net);
  EXPECT_THROW(load(doc.substr(0, doc.size() / 2)), FormatError);
  EXPECT_THROW(load(""), FormatError);
}

TEST(SerializeTest, UnsupportedVersion) {
  const Network net = Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 2, 0.0, {});
  auto j = io::parse(save(net));
  j["format_version"] = "2";
  EXPECT_THROW(load(io::dump(j)), VersionError);
}

TEST(SerializeTest, MissingFieldIsFormatError) {
  const Network net = Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 2, 0.0, {});
  auto j = io::parse(save(net));
  j.erase("layers");
  EXPECT_THROW(load(io::dump(j)), FormatError);
  j = io::parse(save(net));
  j["lift"]["data"] = "oops";
  EXPECT_THROW(load(io::dump(j)), FormatError);
}

TEST(SerializeTest, PathDocumentRoundTrip) {
  std::mt19937_64 rng(7);
  const ParamPath p = random_path(rng, Structure::Separation, 3, 1.0, {0.1, 0.7});
  const io::PathDocument doc{p, ChannelKind::scalar(), ActivationFamily{0.25}};
  const std::string text = io::save_path(doc);
  const io::PathDocument back = io::load_path(text);
  EXPECT_EQ(io::save_path(back), text);
  EXPECT_EQ(back.activation.slope_a, 0.25);
  EXPECT_EQ(std::get<Matrix>(back.path.segment(1).W), std::get<Matrix>(p.segment(1).W));
  auto j = io::parse(text);
  j["path"]["segments"] = 3;
  EXPECT_THROW(io::load_path(io::dump(j)), FormatError);
}

}  // namespace
}  // namespace nflow
