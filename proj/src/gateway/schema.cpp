#include "arcweaver/gateway/schema.hpp"

#include <algorithm>

namespace arcweaver {
namespace {

using nlohmann::json;

bool type_matches(const std::string& type, const json& doc) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "integer") return doc.is_number_integer();
  if (type == "number") return doc.is_number();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  return false;
}

std::size_t utf8_length(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](unsigned char c) { return (c & 0xC0) != 0x80; }));
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& schema, const json& doc, const std::string& path) {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) errors.push_back(at(path) + "value not allowed");
      return;
    }
    if (!schema.is_object()) return;

    if (auto ref = schema.find("$ref"); ref != schema.end()) {
      check(resolve(ref->get<std::string>()), doc, path);
      return;
    }

    if (auto t = schema.find("type"); t != schema.end()) {
      bool ok = false;
      if (t->is_string()) {
        ok = type_matches(t->get<std::string>(), doc);
      } else if (t->is_array()) {
        for (const auto& alt : *t) ok = ok || type_matches(alt.get<std::string>(), doc);
      }
      if (!ok) {
        errors.push_back(at(path) + "expected type " + t->dump() + ", got " +
                         std::string(doc.type_name()));
        return;
      }
    }

    if (auto e = schema.find("enum"); e != schema.end()) {
      if (std::find(e->begin(), e->end(), doc) == e->end()) {
        errors.push_back(at(path) + "value " + doc.dump() + " not in enum " + e->dump());
      }
    }
    if (auto c = schema.find("const"); c != schema.end() && *c != doc) {
      errors.push_back(at(path) + "expected constant " + c->dump());
    }

    if (doc.is_string()) {
      auto len = utf8_length(doc.get_ref<const std::string&>());
      if (auto m = schema.find("minLength"); m != schema.end() && len < m->get<std::size_t>()) {
        errors.push_back(at(path) + "string shorter than " + m->dump());
      }
      if (auto m = schema.find("maxLength"); m != schema.end() && len > m->get<std::size_t>()) {
        errors.push_back(at(path) + "string longer than " + m->dump());
      }
    }

    if (doc.is_number()) {
      double v = doc.get<double>();
      if (auto m = schema.find("minimum"); m != schema.end() && v < m->get<double>()) {
        errors.push_back(at(path) + "below minimum " + m->dump());
      }
      if (auto m = schema.find("maximum"); m != schema.end() && v > m->get<double>()) {
        errors.push_back(at(path) + "above maximum " + m->dump());
      }
    }

    if (doc.is_array()) {
      if (auto m = schema.find("minItems"); m != schema.end() && doc.size() < m->get<std::size_t>()) {
        errors.push_back(at(path) + "fewer than " + m->dump() + " items");
      }
      if (auto m = schema.find("maxItems"); m != schema.end() && doc.size() > m->get<std::size_t>()) {
        errors.push_back(at(path) + "more than " + m->dump() + " items");
      }
      if (auto items = schema.find("items"); items != schema.end()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
          check(*items, doc[i], path + "/" + std::to_string(i));
        }
      }
    }

    if (doc.is_object()) {
      const json* props = nullptr;
      if (auto p = schema.find("properties"); p != schema.end()) props = &*p;
      if (auto r = schema.find("required"); r != schema.end()) {
        for (const auto& name : *r) {
          if (!doc.contains(name.get<std::string>())) {
            errors.push_back(at(path) + "missing required property '" + name.get<std::string>() + "'");
          }
        }
      }
      bool closed = false;
      if (auto ap = schema.find("additionalProperties"); ap != schema.end() && ap->is_boolean()) {
        closed = !ap->get<bool>();
      }
      for (const auto& [key, value] : doc.items()) {
        if (props != nullptr && props->contains(key)) {
          check((*props)[key], value, path + "/" + key);
        } else if (closed) {
          errors.push_back(at(path) + "unexpected property '" + key + "'");
        }
      }
    }
  }

  std::vector<std::string> errors;

 private:
  static std::string at(const std::string& path) { return (path.empty() ? "/" : path) + ": "; }

  const json& resolve(const std::string& ref) {
    static const json empty = json::object();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) return empty;
    auto defs = root_.find("$defs");
    if (defs == root_.end()) return empty;
    auto it = defs->find(ref.substr(prefix.size()));
    return it == defs->end() ? empty : *it;
  }

  const json& root_;
};

}  // namespace

std::vector<std::string> validate_schema(const nlohmann::json& schema,
                                         const nlohmann::json& document) {
  Validator v(schema);
  v.check(schema, document, "");
  return std::move(v.errors);
}

}  // namespace arcweaver
