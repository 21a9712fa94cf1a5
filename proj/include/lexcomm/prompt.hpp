// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"

namespace lexcomm {

using Bindings = std::map<std::string, std::string>;

/// A prompt body with `{{name}}` placeholders.
struct PromptTemplate {
  std::string id;
  int version = 1;
  std::string language;  // "de" or "en"
  std::string body;

  std::set<std::string> placeholders() const {
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string::npos) {
      const auto end = body.find("}}", pos + 2);
      if (end == std::string::npos) break;
      out.insert(body.substr(pos + 2, end - pos - 2));
      pos = end + 2;
    }
    return out;
  }

  /// Substitutes every placeholder in one pass; binding values are inserted
  /// verbatim and never re-scanned. Every placeholder must be bound and every
  /// binding must name a placeholder.
  std::string render(const Bindings& bindings) const {
    const auto names = placeholders();
    for (const auto& n : names) {
      if (!bindings.contains(n)) throw ValidationError("template '" + id + "': placeholder '" + n + "' is unbound");
    }
    for (const auto& [k, v] : bindings) {
      if (!names.contains(k)) throw ValidationError("template '" + id + "' has no placeholder '" + k + "'");
    }
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (true) {
      const auto open = body.find("{{", pos);
      const auto close = open == std::string::npos ? std::string::npos : body.find("}}", open + 2);
      if (close == std::string::npos) {
        out.append(body, pos, std::string::npos);
        break;
      }
      out.append(body, pos, open - pos);
      out += bindings.at(body.substr(open + 2, close - open - 2));
      pos = close + 2;
    }
    return out;
  }

  std::string digest() const {
    return Hasher{}.field(id).field(std::to_string(version)).field(language).field(body).hex();
  }
};

}  // namespace lexcomm
