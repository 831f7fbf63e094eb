#include "ltk/csv.hpp"

#include "ltk/checkpoint.hpp"
#include "ltk/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ltk::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

double number(std::string_view tok, std::size_t line, std::string_view what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    fail(line, "invalid number '" + std::string(tok) + "' for " + std::string(what));
  }
  return v;
}

Vector bounds(std::string_view value, Eigen::Index d, std::size_t line, std::string_view key) {
  const auto parts = split(value, ',');
  if (parts.size() != 1 && static_cast<Eigen::Index>(parts.size()) != d) {
    fail(line, std::string(key) + " needs 1 or " + std::to_string(d) + " values");
  }
  Vector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = number(parts[parts.size() == 1 ? 0 : k], line, key);
  return v;
}

}  // namespace

ObservationFile parse_observations(std::string_view text) {
  ObservationFile f;
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == '\n') {
        lines.push_back(text.substr(start, i - start));
        start = i + 1;
      }
    }
  }

  std::size_t i = 0;
  const auto next_content = [&]() {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
  };

  next_content();
  if (i == lines.size() || trim(lines[i]).rfind('#', 0) != 0) {
    fail(i + 1 > lines.size() ? lines.size() : i + 1, "expected a '# d=<n> lb=<v> ub=<v>' header line");
  }
  {
    const std::size_t line = i + 1;
    std::string_view rest = trim(trim(lines[i]).substr(1));
    std::optional<Eigen::Index> d;
    std::string lb_text, ub_text;
    std::istringstream words{std::string(rest)};
    std::string word;
    while (words >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) fail(line, "expected key=value, got '" + word + "'");
      const std::string key = word.substr(0, eq);
      const std::string value = word.substr(eq + 1);
      if (key == "d") {
        const double v = number(value, line, "d");
        if (v < 1 || v != std::floor(v)) fail(line, "d must be a positive integer");
        d = static_cast<Eigen::Index>(v);
      } else if (key == "lb") {
        lb_text = value;
      } else if (key == "ub") {
        ub_text = value;
      } else {
        fail(line, "unknown header key '" + key + "'");
      }
    }
    if (!d) fail(line, "header is missing d");
    if (lb_text.empty() || ub_text.empty()) fail(line, "header is missing lb or ub");
    f.d = *d;
    f.lb = bounds(lb_text, f.d, line, "lb");
    f.ub = bounds(ub_text, f.d, line, "ub");
    for (Eigen::Index k = 0; k < f.d; ++k) {
      if (!(f.lb[k] < f.ub[k])) fail(line, "lb must be below ub in every dimension");
    }
    ++i;
  }

  const auto skip = [&]() {
    while (i < lines.size() && (trim(lines[i]).empty() || trim(lines[i]).rfind('#', 0) == 0)) ++i;
  };
  skip();
  if (i == lines.size()) return f;  // header only: an empty observation list

  bool has_obs = false;
  {
    const std::size_t line = i + 1;
    const auto cols = split(trim(lines[i]), ',');
    std::size_t c = 0;
    if (!cols.empty() && cols[0] == "obs") {
      has_obs = true;
      c = 1;
    }
    if (cols.size() != c + static_cast<std::size_t>(f.d) + 1) {
      fail(line, "expected " + std::to_string(f.d + 1) + " data columns x_1..x_" + std::to_string(f.d) + ",y");
    }
    for (Eigen::Index k = 0; k < f.d; ++k) {
      const std::string want = "x_" + std::to_string(k + 1);
      if (cols[c + k] != want) fail(line, "column " + std::to_string(c + k + 1) + " must be '" + want + "'");
    }
    if (cols.back() != "y") fail(line, "last column must be 'y'");
    ++i;
  }

  std::vector<std::vector<double>> rows;
  std::optional<std::string> current_id;
  std::vector<std::string> closed;
  const auto flush = [&]() {
    if (rows.empty()) return;
    Observation obs{Matrix(static_cast<Eigen::Index>(rows.size()), f.d), Vector(static_cast<Eigen::Index>(rows.size())),
                    f.lb, f.ub};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Eigen::Index k = 0; k < f.d; ++k) obs.X(static_cast<Eigen::Index>(r), k) = rows[r][k];
      obs.y[static_cast<Eigen::Index>(r)] = rows[r][f.d];
    }
    f.observations.push_back(std::move(obs));
    rows.clear();
  };

  for (; i < lines.size(); ++i) {
    const auto raw = trim(lines[i]);
    if (raw.empty() || raw.front() == '#') continue;
    const std::size_t line = i + 1;
    const auto cols = split(raw, ',');
    const std::size_t c = has_obs ? 1 : 0;
    if (cols.size() != c + static_cast<std::size_t>(f.d) + 1) {
      fail(line, "expected " + std::to_string(c + f.d + 1) + " fields, found " + std::to_string(cols.size()));
    }
    if (has_obs) {
      const std::string id(cols[0]);
      if (id.empty()) fail(line, "empty obs id");
      if (!current_id || *current_id != id) {
        for (const auto& prev : closed) {
          if (prev == id) fail(line, "rows of obs '" + id + "' are not contiguous");
        }
        flush();
        if (current_id) closed.push_back(*current_id);
        current_id = id;
      }
    }
    std::vector<double> row(static_cast<std::size_t>(f.d) + 1);
    for (Eigen::Index k = 0; k < f.d; ++k) {
      row[k] = number(cols[c + k], line, "x_" + std::to_string(k + 1));
      if (row[k] < f.lb[k] || row[k] > f.ub[k]) fail(line, "x_" + std::to_string(k + 1) + " lies outside [lb, ub]");
    }
    row[f.d] = number(cols.back(), line, "y");
    rows.push_back(std::move(row));
  }
  flush();
  return f;
}

ObservationFile read_observations(const std::filesystem::path& path) {
  std::string text;
  try {
    text = checkpoint::read_file(path);
  } catch (const Error& e) {
    throw ConfigError("cannot read observation file '" + path.string() + "': " + e.what());
  }
  try {
    return parse_observations(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string write_table(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::optional<double>>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  char buf[32];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (row[i]) {
        std::snprintf(buf, sizeof buf, "%.17g", *row[i]);
        os << buf;
      } else {
        os << "NA";
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ltk::csv
