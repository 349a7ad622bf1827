#pragma once

#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#ifndef FLOWGUARD_SCHEMA_DIR
#error "FLOWGUARD_SCHEMA_DIR must point at the schemas directory"
#endif

namespace schemacheck {

/// Loads schemas from the repo's schemas/ directory. "$ref"s of the form
/// "other.json#/pointer" or "#/pointer" are inlined before the document is
/// handed to RapidJSON, whose remote-reference support is unreliable.
class Registry {
 public:
  explicit Registry(std::filesystem::path dir = FLOWGUARD_SCHEMA_DIR) : dir_(std::move(dir)) {}

  const rapidjson::SchemaDocument& get(const std::string& name) {
    auto it = docs_.find(name);
    if (it != docs_.end()) return *it->second.schema;
    const auto flat = inline_refs(raw(name), name, 0);
    auto& slot = docs_[name];
    slot.source = std::make_unique<rapidjson::Document>();
    slot.source->Parse(flat.dump().c_str());
    slot.schema = std::make_unique<rapidjson::SchemaDocument>(*slot.source);
    return *slot.schema;
  }

 private:
  const nlohmann::json& raw(const std::string& name) {
    auto it = raw_.find(name);
    if (it != raw_.end()) return it->second;
    std::ifstream in(dir_ / name);
    if (!in) throw std::runtime_error("schema not found: " + name);
    return raw_[name] = nlohmann::json::parse(in);
  }

  nlohmann::json inline_refs(const nlohmann::json& node, const std::string& file, int depth) {
    if (depth > 32) throw std::runtime_error("schema $ref nesting too deep in " + file);
    if (node.is_object()) {
      if (auto ref = node.find("$ref"); ref != node.end()) {
        const auto text = ref->get<std::string>();
        const auto hash = text.find('#');
        const auto target = hash == 0 ? file : text.substr(0, hash);
        const auto pointer = hash == std::string::npos ? std::string() : text.substr(hash + 1);
        return inline_refs(raw(target).at(nlohmann::json::json_pointer(pointer)), target, depth + 1);
      }
      nlohmann::json out = nlohmann::json::object();
      for (const auto& [k, v] : node.items())
        out[k] = k == "definitions" ? nlohmann::json::object() : inline_refs(v, file, depth);
      return out;
    }
    if (node.is_array()) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& v : node) out.push_back(inline_refs(v, file, depth));
      return out;
    }
    return node;
  }

  struct Entry {
    std::unique_ptr<rapidjson::Document> source;
    std::unique_ptr<rapidjson::SchemaDocument> schema;
  };
  std::filesystem::path dir_;
  std::map<std::string, nlohmann::json> raw_;
  std::map<std::string, Entry> docs_;
};

/// Empty string when `value` validates against `schema_name`, else a description.
inline std::string validate(Registry& reg, const std::string& schema_name, const nlohmann::json& value) {
  rapidjson::Document doc;
  const auto text = value.dump();
  doc.Parse(text.c_str());
  if (doc.HasParseError()) return "value does not parse";
  rapidjson::SchemaValidator v(reg.get(schema_name));
  if (doc.Accept(v)) return {};
  rapidjson::StringBuffer where, pointer;
  v.GetInvalidSchemaPointer().StringifyUriFragment(where);
  v.GetInvalidDocumentPointer().StringifyUriFragment(pointer);
  return schema_name + ": keyword '" + v.GetInvalidSchemaKeyword() + "' at schema " + where.GetString() +
         ", value " + pointer.GetString() + " in " + text.substr(0, 400);
}

}  // namespace schemacheck
