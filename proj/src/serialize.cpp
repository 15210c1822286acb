#include "nflow/serialize.hpp"

#include <cmath>
#include <string>

namespace nflow::io {

namespace {

double number(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw FormatError(std::string("field '") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw FormatError(std::string("field '") + key + "' is not finite");
  return x;
}

long integer(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw FormatError(std::string("field '") + key + "' must be an integer");
  }
  return j.at(key).get<long>();
}

std::string text(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw FormatError(std::string("field '") + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

Vector vector_from_json(const Json& j, Eigen::Index expected) {
  if (!j.is_array()) throw FormatError("expected a number array");
  if (static_cast<Eigen::Index>(j.size()) != expected) {
    throw FormatError("array has " + std::to_string(j.size()) + " entries, expected " + std::to_string(expected));
  }
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const auto& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) throw FormatError("array entries must be numbers");
    v(i) = e.get<double>();
    if (!std::isfinite(v(i))) throw FormatError("array entries must be finite");
  }
  return v;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

Json parse(const std::string& textdoc) {
  try {
    return Json::parse(textdoc);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("malformed document: ") + e.what());
  }
}

void check_version(const Json& j) {
  if (!j.is_object()) throw FormatError("document must be a JSON object");
  const std::string v = text(j, "format_version");
  if (v != kModelFormatVersion) {
    throw VersionError("unsupported format_version '" + v + "' (supported: " + kModelFormatVersion + ")");
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("matrix must be an object with rows, cols, data");
  const long rows = integer(j, "rows");
  const long cols = integer(j, "cols");
  if (rows < 0 || cols < 0) throw FormatError("matrix dimensions must be nonnegative");
  const Vector flat = vector_from_json(field(j, "data"), rows * cols);
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long k = 0; k < cols; ++k) m(i, k) = flat(i * cols + k);
  return m;
}

Json channel_kind_to_json(const ChannelKind& k) {
  if (!k.is_grid()) return Json{{"kind", "scalar"}};
  return Json{{"kind", "grid"}, {"n", k.n()}, {"dims", k.dims()}};
}

ChannelKind channel_kind_from_json(const Json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "scalar") return ChannelKind::scalar();
  if (kind == "grid") {
    try {
      return ChannelKind::grid(static_cast<int>(integer(j, "n")), static_cast<int>(integer(j, "dims")));
    } catch (const StructuralError& e) {
      throw FormatError(e.what());
    }
  }
  throw FormatError("unknown channel kind '" + kind + "'");
}

Json coupling_to_json(const Coupling& c) {
  if (const auto* m = std::get_if<Matrix>(&c)) {
    Json j = matrix_to_json(*m);
    j["kind"] = "dense";
    return j;
  }
  const auto& k = std::get<ConvKernel>(c);
  Json entries = Json::array();
  for (const auto& e : k.entries()) {
    if (const auto* ce = std::get_if<ConstantEntry>(&e)) {
      entries.push_back(Json{{"kind", "constant"}, {"value", ce->value}});
    } else {
      entries.push_back(Json{{"kind", "full_grid"}, {"samples", vector_to_json(std::get<GridEntry>(e).samples)}});
    }
  }
  return Json{{"kind", "conv"}, {"channels", k.channels()}, {"entries", std::move(entries)}};
}

Coupling coupling_from_json(const Json& j, const ChannelKind& kind) {
  const std::string tag = text(j, "kind");
  if (tag == "dense") {
    Matrix m = matrix_from_json(j);
    if (m.rows() != m.cols()) throw FormatError("dense coupling must be square");
    return m;
  }
  if (tag != "conv") throw FormatError("unknown coupling kind '" + tag + "'");
  if (!kind.is_grid()) throw FormatError("convolutional coupling requires grid channels");
  const long channels = integer(j, "channels");
  const auto& arr = field(j, "entries");
  if (!arr.is_array() || static_cast<long>(arr.size()) != channels * channels) {
    throw FormatError("conv coupling needs channels^2 entries");
  }
  std::vector<KernelEntry> entries;
  for (const auto& e : arr) {
    const std::string ek = text(e, "kind");
    if (ek == "constant") {
      entries.emplace_back(ConstantEntry{number(e, "value")});
    } else if (ek == "full_grid") {
      entries.emplace_back(GridEntry{vector_from_json(field(e, "samples"), kind.points())});
    } else {
      throw FormatError("unknown kernel entry kind '" + ek + "'");
    }
  }
  try {
    return ConvKernel(kind, static_cast<int>(channels), std::move(entries));
  } catch (const StructuralError& e) {
    throw FormatError(e.what());
  }
}

Json path_to_json(const ParamPath& p, const ChannelKind& kind) {
  (void)kind;
  Json segs = Json::array();
  for (const auto& s : p.segments()) {
    segs.push_back(Json{{"duration", s.duration},
                        {"W", coupling_to_json(s.W)},
                        {"b", matrix_to_json(s.b)},
                        {"alpha", s.alpha}});
  }
  return Json{{"structure", to_string(p.structure())},
              {"D", p.channels()},
              {"allow_field_bias", p.allow_field_bias()},
              {"segments", std::move(segs)}};
}

ParamPath path_from_json(const Json& j, const ChannelKind& kind) {
  const Structure st = structure_from_string(text(j, "structure"));
  const long D = integer(j, "D");
  const bool field_bias = j.contains("allow_field_bias") && j.at("allow_field_bias").is_boolean() &&
                          j.at("allow_field_bias").get<bool>();
  const auto& arr = field(j, "segments");
  if (!arr.is_array()) throw FormatError("segments must be an array");
  std::vector<ParamSegment> segs;
  for (const auto& s : arr) {
    ParamSegment seg;
    seg.duration = number(s, "duration");
    seg.W = coupling_from_json(field(s, "W"), kind);
    seg.b = matrix_from_json(field(s, "b"));
    seg.alpha = s.contains("alpha") ? number(s, "alpha") : 0.0;
    segs.push_back(std::move(seg));
  }
  try {
    ParamPath p(st, std::move(segs), field_bias);
    if (p.channels() != D) throw FormatError("path D does not match its segments");
    return p;
  } catch (const StructuralError& e) {
    throw FormatError(std::string("invalid path: ") + e.what());
  }
}

namespace {

Json layer_to_json(const Layer& l) {
  Json j{{"kind", to_string(l.kind)},
         {"linear", Json{{"skip", l.linear.skip}, {"coupling", coupling_to_json(l.linear.coupling)}}},
         {"b", matrix_to_json(l.bias)}};
  switch (l.kind) {
    case LayerKind::Residual:
      j["dt"] = l.scale;
      j["slope"] = l.slope;
      break;
    case LayerKind::PlainActivated:
      j["scale"] = l.scale;
      j["gamma"] = l.slope;
      break;
    case LayerKind::Affine:
      break;
  }
  return j;
}

Layer layer_from_json(const Json& j, const ChannelKind& kind) {
  Layer l;
  const std::string k = text(j, "kind");
  const auto& lin = field(j, "linear");
  l.linear.skip = number(lin, "skip");
  l.linear.coupling = coupling_from_json(field(lin, "coupling"), kind);
  l.bias = matrix_from_json(field(j, "b"));
  if (k == "residual") {
    l.kind = LayerKind::Residual;
    l.scale = number(j, "dt");
    l.slope = number(j, "slope");
  } else if (k == "plain_activated") {
    l.kind = LayerKind::PlainActivated;
    l.scale = number(j, "scale");
    l.slope = number(j, "gamma");
  } else if (k == "affine") {
    l.kind = LayerKind::Affine;
  } else {
    throw FormatError("unknown layer kind '" + k + "'");
  }
  return l;
}

}  // namespace

Json network_to_json(const Network& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
  return Json{{"format_version", kModelFormatVersion},
              {"document", "network"},
              {"structure_kind", to_string(net.structure())},
              {"channel_kind", channel_kind_to_json(net.kind())},
              {"D", net.channels()},
              {"activation", Json{{"a", net.activation_a()}}},
              {"lift", matrix_to_json(net.lift())},
              {"layers", std::move(layers)},
              {"readout", matrix_to_json(net.readout())}};
}

Network network_from_json(const Json& j) {
  check_version(j);
  const std::string sk = text(j, "structure_kind");
  NetworkStructure st;
  if (sk == "resnet") {
    st = NetworkStructure::Resnet;
  } else if (sk == "plain") {
    st = NetworkStructure::Plain;
  } else {
    throw FormatError("unknown structure_kind '" + sk + "'");
  }
  const ChannelKind kind = channel_kind_from_json(field(j, "channel_kind"));
  const long D = integer(j, "D");
  const double a = number(field(j, "activation"), "a");
  const auto& arr = field(j, "layers");
  if (!arr.is_array()) throw FormatError("layers must be an array");
  std::vector<Layer> layers;
  for (const auto& l : arr) layers.push_back(layer_from_json(l, kind));
  try {
    Network net(st, kind, a, matrix_from_json(field(j, "lift")), std::move(layers),
                matrix_from_json(field(j, "readout")));
    if (net.channels() != D) throw FormatError("D does not match the lift");
    return net;
  } catch (const StructuralError& e) {
    throw FormatError(std::string("invalid network: ") + e.what());
  }
}

std::string save_path(const PathDocument& doc) {
  Json j{{"format_version", kModelFormatVersion},
         {"document", "path"},
         {"channel_kind", channel_kind_to_json(doc.kind)},
         {"activation", Json{{"a", doc.activation.slope_a}}},
         {"path", path_to_json(doc.path, doc.kind)}};
  return dump(j);
}

PathDocument load_path(const std::string& document) {
  const Json j = parse(document);
  check_version(j);
  const ChannelKind kind = channel_kind_from_json(field(j, "channel_kind"));
  const double a = number(field(j, "activation"), "a");
  return PathDocument{path_from_json(field(j, "path"), kind), kind, ActivationFamily{a}};
}

}  // namespace nflow::io

namespace nflow {

std::string save(const Network& net) { return io::dump(io::network_to_json(net)); }

Network load(const std::string& document) {
  try {
    return io::network_from_json(io::parse(document));
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace nflow
