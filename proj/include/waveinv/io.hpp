#pragma once
#include <string>

#include "json.hpp"
#include "waveinv/coefficient.hpp"
#include "waveinv/geometry.hpp"
#include "waveinv/probe.hpp"
#include "waveinv/solver.hpp"
#include "waveinv/sources.hpp"

namespace waveinv {

using json = nlohmann::json;

json to_json(const DomainSpec& d);
DomainSpec domain_from_json(const json& j);
json to_json(const SpacetimeGrid& g);
json to_json(const InteractionConfig& c);
json to_json(const SourceSpec& s);
SourceSpec source_from_json(const json& j);
json to_json(const ProbeResult& r);
json to_json(const Bump& b);
json to_json(const Coefficient& c);
// number, {"base", "bumps", "file"}; sampled files are resolved relative to base_dir
Coefficient coefficient_from_json(const json& j, const std::string& base_dir = "");
json to_json(const VRecovery& v);

// V.wvf, h.wvf sampled on g (one level when static) plus model.json.
void write_model(const Model& m, const SpacetimeGrid& g, const std::string& dir);

// Reads a point: a numeric array.
Point point_from_json(const json& j);

}  // namespace waveinv
