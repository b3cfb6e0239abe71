#pragma once

#include <nlohmann/json.hpp>

// to_json/from_json for plain structs. Missing keys keep the member's default,
// which lets older documents load after a field is added.
#define EVMEM_JSON_TO(field) nlohmann_json_j[#field] = nlohmann_json_t.field;
#define EVMEM_JSON_FROM(field) \
  if (nlohmann_json_j.contains(#field)) nlohmann_json_j.at(#field).get_to(nlohmann_json_t.field);

#define EVMEM_JSON_FIELDS(Type, ...)                                                     \
  inline void to_json(nlohmann::json& nlohmann_json_j, const Type& nlohmann_json_t) {    \
    NLOHMANN_JSON_EXPAND(NLOHMANN_JSON_PASTE(EVMEM_JSON_TO, __VA_ARGS__))                \
  }                                                                                      \
  inline void from_json(const nlohmann::json& nlohmann_json_j, Type& nlohmann_json_t) {  \
    NLOHMANN_JSON_EXPAND(NLOHMANN_JSON_PASTE(EVMEM_JSON_FROM, __VA_ARGS__))              \
  }
