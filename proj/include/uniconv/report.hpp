#pragma once

// Structured run reports: an ordered JSON document rendered either as JSON or
// as an indented key/value text listing.  Non-finite numbers are emitted as
// explicit strings so every field is either a finite number or visibly
// marked.  Reports are deterministic for fixed inputs except for fields
// named 'elapsed_ms'.

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "uniconv/errors.hpp"

namespace uniconv::report {

using Doc = nlohmann::ordered_json;

inline Doc num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  return v;
}

inline void render_text(const Doc& doc, std::ostream& os, int indent = 0) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const Doc& v = it.value();
    if (v.is_object()) {
      os << pad << it.key() << ":\n";
      render_text(v, os, indent + 1);
    } else if (v.is_array()) {
      os << pad << it.key() << ": [";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
      }
      os << "]\n";
    } else if (v.is_string()) {
      os << pad << it.key() << ": " << v.get<std::string>() << '\n';
    } else {
      os << pad << it.key() << ": " << v.dump() << '\n';
    }
  }
}

inline std::string render(const Doc& doc, const std::string& format) {
  if (format == "json") return doc.dump(2) + "\n";
  if (format == "text") {
    std::ostringstream os;
    render_text(doc, os);
    return os.str();
  }
  throw Error(errc::invalid_parameter, "unknown format '" + format + "'");
}

inline void write_report(const Doc& doc, const std::string& format,
                         const std::string& path, std::ostream& fallback) {
  const std::string body = render(doc, format);
  if (path.empty()) {
    fallback << body;
    return;
  }
  // Write-then-rename keeps partially written reports invisible.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw Error(errc::invalid_parameter, "cannot open '" + tmp + "'");
    os << body;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error(errc::invalid_parameter, "cannot move report to '" + path + "'");
}

}  // namespace uniconv::report
