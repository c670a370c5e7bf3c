#include "esmine/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "esmine/rng.hpp"

namespace esm {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------

Manifest Manifest::parse(const std::string& json_text) {
  const json j = json::parse(json_text);
  Manifest m;
  for (const auto& c : j.at("columns")) {
    ColumnManifest col;
    col.name = c.at("name").get<std::string>();
    const auto kind = c.value("kind", "input");
    if (kind == "input") col.kind = VariableKind::input;
    else if (kind == "target") col.kind = VariableKind::target;
    else throw DataError("column '" + col.name + "' has unknown kind '" + kind + "'");
    const auto orient = c.value("orientation", "maximize");
    if (orient == "maximize") col.orientation = Orientation::maximize;
    else if (orient == "minimize") col.orientation = Orientation::minimize;
    else throw DataError("column '" + col.name + "' has unknown orientation '" + orient + "'");
    if (c.contains("min")) col.min = c.at("min").get<double>();
    if (c.contains("max")) col.max = c.at("max").get<double>();
    m.columns.push_back(std::move(col));
  }
  if (j.contains("cost_column") && !j.at("cost_column").is_null()) m.cost_column = j.at("cost_column").get<std::string>();
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string Manifest::to_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    json o;
    o["name"] = c.name;
    o["kind"] = c.kind == VariableKind::input ? "input" : "target";
    if (c.kind == VariableKind::target)
      o["orientation"] = c.orientation == Orientation::maximize ? "maximize" : "minimize";
    if (c.min) o["min"] = *c.min;
    if (c.max) o["max"] = *c.max;
    cols.push_back(o);
  }
  json j;
  j["columns"] = cols;
  if (cost_column) j["cost_column"] = *cost_column;
  return j.dump(2);
}

Dataset parse_csv(const std::string& text, const Manifest& manifest) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV is empty (no header row)");
  const auto header = split_line(line);

  // Column positions for every manifest entry, plus the optional cost column.
  std::vector<std::size_t> pos;
  for (const auto& c : manifest.columns) {
    const auto it = std::find(header.begin(), header.end(), c.name);
    if (it == header.end()) throw DataError("manifest column '" + c.name + "' is missing from the CSV header");
    pos.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::optional<std::size_t> cost_pos;
  if (manifest.cost_column) {
    const auto it = std::find(header.begin(), header.end(), *manifest.cost_column);
    if (it == header.end()) throw DataError("cost column '" + *manifest.cost_column + "' is missing");
    cost_pos = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::vector<double>> cells;  // per row, manifest order
  std::vector<double> costs;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto parts = split_line(line);
    if (parts.size() != header.size()) {
      throw DataError("row " + std::to_string(row_no) + " has " + std::to_string(parts.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    std::vector<double> values;
    for (std::size_t c = 0; c < pos.size(); ++c) {
      const auto v = parse_number(parts[pos[c]]);
      if (!v) {
        throw DataError("non-numeric cell '" + parts[pos[c]] + "' at (row " + std::to_string(row_no) +
                        ", column " + std::to_string(pos[c] + 1) + " '" + manifest.columns[c].name + "')");
      }
      values.push_back(*v);
    }
    if (cost_pos) {
      const auto v = parse_number(parts[*cost_pos]);
      if (!v || *v < 0.0)
        throw DataError("bad cost at (row " + std::to_string(row_no) + ", column " +
                        std::to_string(*cost_pos + 1) + ")");
      costs.push_back(*v);
    }
    cells.push_back(std::move(values));
  }

  std::vector<VariableSpec> specs;
  for (std::size_t c = 0; c < manifest.columns.size(); ++c) {
    const auto& col = manifest.columns[c];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : cells) {
      lo = std::min(lo, r[c]);
      hi = std::max(hi, r[c]);
    }
    if (!col.min && !col.max && !cells.empty() && lo == hi) {
      throw DataError("column '" + col.name + "' is constant; it cannot be normalized");
    }
    specs.push_back({col.name, col.min.value_or(lo), col.max.value_or(hi), col.kind, col.orientation});
  }
  Dataset empty(specs);

  std::vector<Configuration> rows;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    Point raw, targets;
    for (std::size_t c = 0; c < manifest.columns.size(); ++c)
      (manifest.columns[c].kind == VariableKind::input ? raw : targets).push_back(cells[r][c]);
    auto row = empty.make_row(raw, std::move(targets), Status::existing, Provenance::seed);
    if (cost_pos) row.cost = costs[r];
    rows.push_back(std::move(row));
  }
  return empty.with_rows(std::move(rows));
}

Dataset load_csv(const std::filesystem::path& path, const Manifest& manifest) {
  return parse_csv(read_file(path), manifest);
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream out;
  bool first = true;
  for (const auto& v : ds.inputs()) {
    out << (first ? "" : ",") << v.name;
    first = false;
  }
  for (const auto& v : ds.targets()) out << "," << v.name;
  out << "\n";
  for (const auto& row : ds.rows()) {
    for (std::size_t i = 0; i < row.raw.size(); ++i) out << (i ? "," : "") << format_double(row.raw[i]);
    for (std::size_t t = 0; t < ds.target_count(); ++t) {
      out << ",";
      if (row.targets) out << format_double((*row.targets)[t]);
    }
    out << "\n";
  }
  return out.str();
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_csv(ds);
}

Dataset existing_subset(const Dataset& ds) {
  std::vector<Configuration> rows;
  for (auto r : ds.rows())
    if (r.status == Status::existing) {
      r.id = 0;
      rows.push_back(std::move(r));
    }
  return Dataset(ds.variables()).with_rows(std::move(rows));
}

Manifest manifest_for(const Dataset& ds) {
  Manifest m;
  for (const auto& v : ds.variables())
    m.columns.push_back({v.name, v.kind, v.orientation, v.min, v.max});
  return m;
}

// ---------------------------------------------------------------------------

ManifoldKind manifold_from_string(const std::string& s) {
  if (s == "hyperboloid3d") return ManifoldKind::hyperboloid3d;
  if (s == "paraboloid4d") return ManifoldKind::paraboloid4d;
  if (s == "hypersphere4d") return ManifoldKind::hypersphere4d;
  throw DataError("unknown manifold kind '" + s + "'");
}

std::string to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::hyperboloid3d: return "hyperboloid3d";
    case ManifoldKind::paraboloid4d: return "paraboloid4d";
    case ManifoldKind::hypersphere4d: return "hypersphere4d";
  }
  return "hyperboloid3d";
}

namespace {
double grid(int i, int n, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}
}  // namespace

ManifoldData gen_manifold(ManifoldKind kind, std::uint64_t seed) {
  ManifoldData out;
  switch (kind) {
    case ManifoldKind::hyperboloid3d:
      for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 30; ++j) {
          const double x = grid(i, 30, -1.0, 1.0);
          const double y = grid(j, 30, -1.0, 1.0);
          const double z = 2.0 * std::sqrt(x * x / 0.04 + y * y / 0.04 + 1.0);
          out.points.push_back({x, y, (i + j) % 2 == 0 ? z : -z});
        }
      }
      out.agent = {0.0, 0.0, 0.0};
      break;
    case ManifoldKind::paraboloid4d:
      for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
          for (int k = 0; k < 10; ++k) {
            const double z = grid(k, 10, -5.0, 5.0);
            out.points.push_back({grid(i, 10, -5.0, 5.0), grid(j, 10, -5.0, 5.0), z, z * z});
          }
      out.agent = {0.0, 0.0, 0.0, 20.0};
      break;
    case ManifoldKind::hypersphere4d: {
      Rng rng(seed);
      for (int i = 0; i < 1000; ++i) {
        const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const double phi = rng.uniform(0.0, std::numbers::pi);
        out.points.push_back({std::cos(psi) * std::sin(theta) * std::sin(phi),
                              std::sin(psi) * std::sin(theta) * std::sin(phi),
                              std::cos(theta) * std::sin(phi), std::cos(phi)});
      }
      out.agent = {0.0, 0.0, 0.0, 0.0};
      break;
    }
  }
  return out;
}

Dataset dataset_from_points(std::span<const Point> raw,
                            std::optional<std::pair<double, double>> bounds) {
  if (raw.empty()) throw DataError("no points");
  const std::size_t d = raw.front().size();
  std::vector<VariableSpec> specs;
  for (std::size_t a = 0; a < d; ++a) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : raw) {
      lo = std::min(lo, p[a]);
      hi = std::max(hi, p[a]);
    }
    if (bounds) std::tie(lo, hi) = *bounds;
    specs.push_back({"x" + std::to_string(a), lo, hi, VariableKind::input});
  }
  Dataset empty(specs);
  std::vector<Configuration> rows;
  for (const auto& p : raw) {
    auto row = empty.make_row(p, Point{}, Status::existing, Provenance::seed);
    rows.push_back(std::move(row));
  }
  return empty.with_rows(std::move(rows));
}

Dataset gen_demo2d(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.uniform_point(2));
  return dataset_from_points(pts, std::pair{0.0, 1.0});
}

Dataset gen_wine_like(std::size_t n, std::uint64_t seed) {
  // Per feature: median, log-scale spread, shift per quality step above 5.6,
  // and the physical range the values are clipped to.
  struct Feature {
    const char* name;
    double median;
    double log_sd;
    double quality_shift;  // multiplicative, per quality unit
    double lo;
    double hi;
  };
  static constexpr Feature features[] = {
      {"fixed_acidity", 7.9, 0.20, 0.02, 4.6, 15.9},
      {"volatile_acidity", 0.52, 0.32, -0.14, 0.12, 1.58},
      {"citric_acid", 0.26, 0.70, 0.12, 0.0, 1.0},
      {"residual_sugar", 2.2, 0.32, 0.0, 0.9, 15.5},
      {"chlorides", 0.079, 0.30, -0.05, 0.012, 0.611},
      {"free_sulfur_dioxide", 14.0, 0.62, -0.02, 1.0, 72.0},
      {"total_sulfur_dioxide", 38.0, 0.65, -0.10, 6.0, 289.0},
      {"density", 0.9968, 0.0019, -0.0004, 0.99007, 1.00369},
      {"pH", 3.31, 0.047, -0.005, 2.74, 4.01},
      {"sulphates", 0.62, 0.22, 0.07, 0.33, 2.0},
      {"alcohol", 10.2, 0.095, 0.06, 8.4, 14.9},
  };
  static constexpr int kQualities[] = {3, 4, 5, 6, 7, 8};
  static constexpr double kCounts[] = {10, 53, 681, 638, 199, 18};  // of 1599

  std::vector<int> quality;
  double acc = 0.0;
  std::size_t assigned = 0;
  for (std::size_t q = 0; q < 6; ++q) {
    acc += kCounts[q];
    const auto upto = static_cast<std::size_t>(std::llround(acc / 1599.0 * static_cast<double>(n)));
    for (; assigned < upto; ++assigned) quality.push_back(kQualities[q]);
  }

  Rng rng(seed);
  std::vector<VariableSpec> specs;
  for (const auto& f : features) specs.push_back({f.name, f.lo, f.hi, VariableKind::input});
  specs.push_back({"quality", 3.0, 8.0, VariableKind::target, Orientation::maximize});
  Dataset empty(specs);
  std::vector<Configuration> rows;
  for (std::size_t i = 0; i < quality.size(); ++i) {
    const double qd = quality[i] - 5.6;
    // Shared latent factor gives the acidity/density/pH block its correlation.
    const double acid = rng.normal();
    Point raw;
    for (std::size_t k = 0; k < std::size(features); ++k) {
      const auto& f = features[k];
      double z = rng.normal();
      if (k == 0 || k == 2) z = 0.7 * acid + 0.71 * z;
      if (k == 7) z = 0.6 * acid + 0.8 * z;
      if (k == 8) z = -0.65 * acid + 0.76 * z;
      double v = 0.0;
      if (k == 2) {
        v = std::max(0.0, f.median + 0.19 * z + f.quality_shift * qd);  // roughly normal, floored at 0
      } else {
        v = f.median * std::exp(f.log_sd * z + f.quality_shift * qd);
      }
      raw.push_back(std::clamp(v, f.lo, f.hi));
    }
    rows.push_back(empty.make_row(raw, Point{static_cast<double>(quality[i])}, Status::existing,
                                  Provenance::seed));
  }
  return empty.with_rows(std::move(rows));
}

// ---------------------------------------------------------------------------

double VerificationOracle::score(std::span<const double> t) const {
  const auto specs = targets();
  double s = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    double u = std::clamp((t[i] - specs[i].min) / (specs[i].max - specs[i].min), 0.0, 1.0);
    if (specs[i].orientation == Orientation::minimize) u = 1.0 - u;
    s += u;
  }
  return s / static_cast<double>(specs.size());
}

std::vector<VariableSpec> VerificationOracle::inputs() const {
  std::vector<VariableSpec> out;
  for (std::size_t a = 0; a < dim(); ++a) out.push_back({"x" + std::to_string(a), 0.0, 1.0, VariableKind::input});
  return out;
}

Dataset VerificationOracle::empty_dataset() const {
  auto specs = inputs();
  for (auto& t : targets()) specs.push_back(t);
  return Dataset(specs);
}

namespace {

Point centre(std::size_t d, std::uint64_t seed, std::uint64_t which, double lo, double hi) {
  Rng rng = Rng::stream(seed, which);
  Point c(d);
  for (auto& x : c) x = rng.uniform(lo, hi);
  return c;
}

// Two maximized concave objectives with different optima; the Pareto set is
// the segment between them.
class QuadraticOracle final : public VerificationOracle {
public:
  QuadraticOracle(std::size_t d, std::uint64_t seed)
      : d_(d), a_(centre(d, seed, 0, 0.15, 0.45)), b_(centre(d, seed, 1, 0.55, 0.85)) {}
  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return d_; }
  std::vector<VariableSpec> targets() const override {
    return {{"bowl_a", 0.0, 1.0, VariableKind::target, Orientation::maximize},
            {"bowl_b", 0.0, 1.0, VariableKind::target, Orientation::maximize}};
  }
  Measurement measure(std::span<const double> x) const override {
    const double dd = static_cast<double>(d_);
    return {{1.0 - squared_distance(x, a_) / dd, 1.0 - squared_distance(x, b_) / dd}, 1.0};
  }

private:
  std::size_t d_;
  Point a_, b_;
};

// Rastrigin-style landscape: a quality objective (maximize) and a cost
// objective (minimize), each with many local optima around its own centre.
class MultimodalOracle final : public VerificationOracle {
public:
  MultimodalOracle(std::size_t d, std::uint64_t seed)
      : d_(d), a_(centre(d, seed, 2, 0.2, 0.8)), b_(centre(d, seed, 3, 0.2, 0.8)) {}
  std::string name() const override { return "multimodal"; }
  std::size_t dim() const override { return d_; }
  std::vector<VariableSpec> targets() const override {
    return {{"quality", 0.0, 1.0, VariableKind::target, Orientation::maximize},
            {"cost", 0.0, 1.0, VariableKind::target, Orientation::minimize}};
  }
  Measurement measure(std::span<const double> x) const override {
    return {{1.0 - rastrigin(x, a_), rastrigin(x, b_)}, 1.0};
  }

private:
  // Normalized to [0,1]: z in [-3,3] per coordinate, A = 2.
  double rastrigin(std::span<const double> x, const Point& c) const {
    constexpr double kA = 2.0;
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      const double z = 3.0 * (x[i] - c[i]);
      s += z * z - kA * std::cos(2.0 * std::numbers::pi * z) + kA;
    }
    return std::clamp(s / (static_cast<double>(d_) * (9.0 + 2.0 * kA)), 0.0, 1.0);
  }
  std::size_t d_;
  Point a_, b_;
};

// Linear objectives with deterministic, point-hashed noise.
class LinearNoiseOracle final : public VerificationOracle {
public:
  LinearNoiseOracle(std::size_t d, std::uint64_t seed) : d_(d), seed_(seed) {
    Rng rng(seed ^ 0x11);
    for (std::size_t i = 0; i < d; ++i) {
      w_.push_back(rng.uniform(0.2, 1.0));
      v_.push_back(rng.uniform(0.2, 1.0));
    }
    sw_ = std::accumulate(w_.begin(), w_.end(), 0.0);
    sv_ = std::accumulate(v_.begin(), v_.end(), 0.0);
  }
  std::string name() const override { return "linear-noise"; }
  std::size_t dim() const override { return d_; }
  std::vector<VariableSpec> targets() const override {
    return {{"throughput", -0.1, 1.1, VariableKind::target, Orientation::maximize},
            {"price", -0.1, 1.1, VariableKind::target, Orientation::minimize}};
  }
  Measurement measure(std::span<const double> x) const override {
    std::uint64_t h = seed_;
    for (double v : x) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      h = splitmix64(h ^ bits);
    }
    Rng noise(h);
    double f0 = 0.0, f1 = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      f0 += w_[i] * x[i];
      f1 += v_[i] * x[i];
    }
    return {{f0 / sw_ + 0.02 * noise.normal(), f1 / sv_ * 0.8 + 0.02 * noise.normal()}, 1.0};
  }

private:
  std::size_t d_;
  std::uint64_t seed_;
  std::vector<double> w_, v_;
  double sw_ = 1.0, sv_ = 1.0;
};

}  // namespace

std::vector<std::string> oracle_names() { return {"quadratic", "multimodal", "linear-noise"}; }

std::unique_ptr<VerificationOracle> make_oracle(const std::string& name, std::size_t dim,
                                                std::uint64_t seed) {
  if (dim == 0) throw DataError("oracle dimension must be >= 1");
  if (name == "quadratic") return std::make_unique<QuadraticOracle>(dim, seed);
  if (name == "multimodal") return std::make_unique<MultimodalOracle>(dim, seed);
  if (name == "linear-noise") return std::make_unique<LinearNoiseOracle>(dim, seed);
  throw DataError("unknown oracle '" + name + "'");
}

Dataset seed_dataset(const VerificationOracle& oracle, std::size_t n, std::uint64_t seed) {
  const Dataset empty = oracle.empty_dataset();
  std::vector<Configuration> rows;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed ^ 0xDA7A5E7ULL, i);
    const Point p = rng.uniform_point(oracle.dim());
    auto row = empty.make_row_normalized(p, oracle.measure(p).targets, Status::existing, Provenance::seed);
    rows.push_back(std::move(row));
  }
  return empty.with_rows(std::move(rows));
}

}  // namespace esm
