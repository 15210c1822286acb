#pragma once

#include <string>

#include "json.hpp"
#include "nflow/core.hpp"
#include "nflow/network.hpp"
#include "nflow/params.hpp"

namespace nflow::io {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json channel_kind_to_json(const ChannelKind& k);
ChannelKind channel_kind_from_json(const Json& j);

Json coupling_to_json(const Coupling& c);
Coupling coupling_from_json(const Json& j, const ChannelKind& kind);

Json path_to_json(const ParamPath& p, const ChannelKind& kind);
ParamPath path_from_json(const Json& j, const ChannelKind& kind);

Json network_to_json(const Network& net);
Network network_from_json(const Json& j);

/// Path document: a versioned wrapper carrying the path, its channel kind
/// and the activation slope.
struct PathDocument {
  ParamPath path;
  ChannelKind kind;
  ActivationFamily activation;
};
std::string save_path(const PathDocument& doc);
PathDocument load_path(const std::string& document);

/// Parses JSON text, mapping syntax errors to FormatError.
Json parse(const std::string& text);
/// Rejects any format_version other than the supported one.
void check_version(const Json& j);
/// Canonical text form (sorted keys, two-space indent, trailing newline).
std::string dump(const Json& j);

}  // namespace nflow::io
