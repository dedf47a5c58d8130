#include "fmicl/io.hpp"

#include "fmicl/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fmicl {

std::string
format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void
dump_into(std::string& out, const nlohmann::json& j, int indent, int depth)
{
  const bool pretty = indent >= 0;
  auto newline = [&](int level) {
    if (pretty) {
      out += '\n';
      out.append(static_cast<std::size_t>(indent * level), ' ');
    }
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first)
          out += ',';
        first = false;
        newline(depth + 1);
        out += nlohmann::json(key).dump();
        out += pretty ? ": " : ":";
        dump_into(out, value, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& value : j) {
        if (!first)
          out += ',';
        first = false;
        newline(depth + 1);
        dump_into(out, value, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      std::string s = format_double(v);
      // keep floats recognizable as floats when they are integral
      if (s.find_first_of(".eE") == std::string::npos)
        s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

} // namespace

std::string
dump_json(const nlohmann::json& j, int indent)
{
  std::string out;
  dump_into(out, j, indent, 0);
  return out;
}

void
write_text_file(const std::filesystem::path& path, std::string_view contents)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw Error("cannot open '" + path.string() + "' for writing");
  os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!os)
    throw Error("failed writing '" + path.string() + "'");
}

std::string
read_text_file(const std::filesystem::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace fmicl
