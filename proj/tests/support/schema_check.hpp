#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/error/en.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>
#include <rapidjson/writer.h>

namespace hydrad::testing {

/// Loads the checked-in schemas and validates documents against them.
/// Cross-file "$ref"s resolve against the same directory.
class SchemaRegistry final : public rapidjson::IRemoteSchemaDocumentProvider
{
public:
  explicit SchemaRegistry(std::string dir)
    : dir_(std::move(dir))
  {
  }

  // RapidJSON 1.1 passes a length one short of the document part of the
  // ref, so the name is re-read up to the fragment.
  const rapidjson::SchemaDocument* GetRemoteDocument(const char* uri, rapidjson::SizeType length) override
  {
    std::string name(uri, length);
    while (uri[name.size()] != '\0' && uri[name.size()] != '#') {
      name += uri[name.size()];
    }
    return &schema(name);
  }

  const rapidjson::SchemaDocument& schema(const std::string& name)
  {
    if (auto it = schemas_.find(name); it != schemas_.end()) {
      return *it->second;
    }
    std::ifstream in(dir_ + "/" + name);
    if (!in) {
      throw std::runtime_error("missing schema " + name);
    }
    std::stringstream text;
    text << in.rdbuf();
    auto doc = std::make_unique<rapidjson::Document>();
    doc->Parse(text.str().c_str());
    if (doc->HasParseError()) {
      throw std::runtime_error("schema " + name + ": " + rapidjson::GetParseError_En(doc->GetParseError()));
    }
    auto compiled = std::make_unique<rapidjson::SchemaDocument>(*doc, this);
    auto& ref = *compiled;
    sources_.emplace(name, std::move(doc));
    schemas_.emplace(name, std::move(compiled));
    return ref;
  }

  /// Empty string when valid, otherwise where it failed.
  std::string violations(const std::string& name, const nlohmann::json& value)
  {
    rapidjson::Document doc;
    auto const text = value.dump();
    doc.Parse(text.c_str());
    rapidjson::SchemaValidator validator(schema(name));
    if (doc.Accept(validator)) {
      return {};
    }
    rapidjson::StringBuffer where;
    validator.GetInvalidSchemaPointer().StringifyUriFragment(where);
    rapidjson::StringBuffer at;
    validator.GetInvalidDocumentPointer().StringifyUriFragment(at);
    return std::string(name) + ": keyword '" + validator.GetInvalidSchemaKeyword() + "' at schema " +
           where.GetString() + ", document " + at.GetString() + " in " + text;
  }

  bool valid(const std::string& name, const nlohmann::json& value) { return violations(name, value).empty(); }

private:
  std::string dir_;
  std::map<std::string, std::unique_ptr<rapidjson::Document>> sources_;
  std::map<std::string, std::unique_ptr<rapidjson::SchemaDocument>> schemas_;
};

}  // namespace hydrad::testing
