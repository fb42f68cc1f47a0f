#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "rwalk/reduction.hpp"

namespace rwalk {

// kernel-file round trip of the compiler metadata
std::shared_ptr<const CompiledMeta> detail_parse_compiled_meta(const nlohmann::json& j,
                                                               const std::string& origin);
nlohmann::json detail_serialize_compiled_meta(const CompiledMeta& meta);

}  // namespace rwalk
