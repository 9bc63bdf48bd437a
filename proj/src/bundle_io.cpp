#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmc/assembly.hpp"

namespace cmc {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using nlohmann::json;

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void write_f64(const fs::path& path, const std::vector<double>& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (double x : data) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    u = to_le(u);
    os.write(reinterpret_cast<const char*>(&u), 8);
  }
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<double> read_f64(const fs::path& path, std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(is.tellg());
  if (size != 8 * count)
    throw Error(ErrorKind::Io, path.string() + ": expected " + std::to_string(8 * count) + " bytes, found " +
                                   std::to_string(size));
  is.seekg(0);
  std::vector<double> out(count);
  for (double& x : out) {
    std::uint64_t u;
    is.read(reinterpret_cast<char*>(&u), 8);
    u = to_le(u);
    std::memcpy(&x, &u, 8);
  }
  if (!is) throw Error(ErrorKind::Io, "read failed for " + path.string());
  return out;
}

std::vector<double> row_major(const MatrixXd& M) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) v.push_back(M(i, j));
  return v;
}

MatrixXd from_row_major(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  MatrixXd M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) M(i, j) = v[i * cols + j];
  return M;
}

const char* kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::Central: return "central";
    case RegionKind::Standard: return "standard";
    case RegionKind::Transition: return "transition";
  }
  return "central";
}

RegionKind kind_from(const std::string& s) {
  if (s == "standard") return RegionKind::Standard;
  if (s == "transition") return RegionKind::Transition;
  if (s == "central") return RegionKind::Central;
  throw Error(ErrorKind::Io, "unknown region kind " + s);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string csv_num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void export_bundle(const SurfaceBundle& b, const std::string& dir, const FluxReport* flux) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + root.string() + ": " + ec.message());

  json m;
  m["format"] = "cmc-surface-bundle";
  m["version"] = 1;
  m["n"] = b.n;
  m["tau_bar"] = b.tau_bar;
  m["meta"] = b.meta.is_null() ? json::object() : b.meta;
  m["charts"] = json::array();
  for (std::size_t k = 0; k < b.charts.size(); ++k) {
    const ChartSamples& c = b.charts[k];
    const std::string stem = "chart" + std::to_string(k) + "_";
    json arrays = json::object();
    auto put = [&](const std::string& name, const std::vector<double>& data, std::vector<std::size_t> shape) {
      const std::string file = stem + name + ".f64";
      write_f64(root / file, data);
      arrays[name] = {{"file", file}, {"shape", shape}};
    };
    if (c.kind != "vertex") put("t", c.t, {c.t.size()});
    put("param", row_major(c.param), {static_cast<std::size_t>(c.param.rows()), static_cast<std::size_t>(c.param.cols())});
    put("X", row_major(c.X), {static_cast<std::size_t>(c.X.rows()), static_cast<std::size_t>(c.X.cols())});
    put("H", c.H, {c.rows, c.cols});
    put("rho", c.rho, {c.rows, c.cols});
    put("h_dislocation", c.h_dislocation, {c.rows, c.cols});
    put("h_gluing", c.h_gluing, {c.rows, c.cols});
    json jc = {{"id", c.id},     {"kind", c.kind},         {"index", c.index},
               {"rows", c.rows}, {"cols", c.cols},         {"arrays", arrays},
               {"adjacent", c.adjacent}, {"row_regions", c.row_regions}};
    std::set<std::string> tags(c.row_regions.begin(), c.row_regions.end());
    jc["regions"] = std::vector<std::string>(tags.begin(), tags.end());
    m["charts"].push_back(jc);

    if (c.kind != "vertex") {
      std::ostringstream csv;
      csv << "t,rho,max_abs_h_error,max_abs_h_dislocation,max_abs_h_gluing,region\n";
      for (std::size_t i = 0; i < c.rows; ++i) {
        double e = 0, dis = 0, glu = 0;
        for (std::size_t j = 0; j < c.cols; ++j) {
          const std::size_t q = i * c.cols + j;
          e = std::max(e, std::abs(c.H[q] - 1.0));
          dis = std::max(dis, std::abs(c.h_dislocation[q]));
          glu = std::max(glu, std::abs(c.h_gluing[q]));
        }
        csv << csv_num(c.t[i]) << ',' << csv_num(c.rho[i * c.cols]) << ',' << csv_num(e) << ',' << csv_num(dis)
            << ',' << csv_num(glu) << ',' << c.row_regions[i] << '\n';
      }
      const std::string file = "profile_" + std::to_string(k) + ".csv";
      write_text(root / file, csv.str());
      m["tables"].push_back(file);
    }
  }
  m["regions"] = json::array();
  for (const Region& r : b.regions)
    m["regions"].push_back({{"tag", r.tag},
                            {"kind", kind_name(r.kind)},
                            {"vertex", r.vertex},
                            {"element", r.element},
                            {"m", r.m},
                            {"side", r.side},
                            {"t0", r.t0},
                            {"t1", r.t1},
                            {"truncated", r.truncated}});
  if (flux) {
    m["flux"] = flux->to_json();
    std::ostringstream csv;
    csv << "vertex,component,dunder,closed_form,literal_form,discrepancy\n";
    for (const FluxEntry& e : flux->entries)
      for (Eigen::Index i = 0; i < e.dunder.size(); ++i)
        csv << e.id << ',' << i << ',' << csv_num(e.dunder(i)) << ',' << csv_num(e.closed_form(i)) << ','
            << csv_num(e.literal_form(i)) << ',' << csv_num(e.discrepancy) << '\n';
    write_text(root / "flux.csv", csv.str());
    m["tables"].push_back("flux.csv");
  }
  if (!m.contains("tables")) m["tables"] = json::array();
  write_text(root / "manifest.json", m.dump(2) + "\n");
}

SurfaceBundle import_bundle(const std::string& dir) {
  const fs::path root(dir);
  const fs::path mpath = root / "manifest.json";
  std::ifstream is(mpath);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + mpath.string());
  json m;
  try {
    is >> m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, mpath.string() + ": " + e.what());
  }
  SurfaceBundle b;
  try {
    if (m.at("format") != "cmc-surface-bundle") throw Error(ErrorKind::Io, mpath.string() + ": unknown format");
    b.n = m.at("n");
    b.tau_bar = m.at("tau_bar");
    b.meta = m.at("meta");
    for (const json& jc : m.at("charts")) {
      ChartSamples c;
      c.id = jc.at("id");
      c.kind = jc.at("kind");
      c.index = jc.at("index");
      c.rows = jc.at("rows");
      c.cols = jc.at("cols");
      c.adjacent = jc.at("adjacent").get<std::vector<std::string>>();
      c.row_regions = jc.at("row_regions").get<std::vector<std::string>>();
      const json& A = jc.at("arrays");
      auto load = [&](const std::string& name, std::vector<std::size_t>& shape) {
        const json& a = A.at(name);
        shape = a.at("shape").get<std::vector<std::size_t>>();
        std::size_t count = 1;
        for (std::size_t s : shape) count *= s;
        return read_f64(root / a.at("file").get<std::string>(), count);
      };
      std::vector<std::size_t> shape;
      if (A.contains("t")) c.t = load("t", shape);
      auto pv = load("param", shape);
      c.param = from_row_major(pv, shape[0], shape[1]);
      auto xv = load("X", shape);
      c.X = from_row_major(xv, shape[0], shape[1]);
      c.H = load("H", shape);
      c.rho = load("rho", shape);
      c.h_dislocation = load("h_dislocation", shape);
      c.h_gluing = load("h_gluing", shape);
      b.charts.push_back(std::move(c));
    }
    for (const json& jr : m.at("regions")) {
      Region r;
      r.tag = jr.at("tag");
      r.kind = kind_from(jr.at("kind"));
      r.vertex = jr.at("vertex");
      r.element = jr.at("element");
      r.m = jr.at("m");
      r.side = jr.at("side");
      r.t0 = jr.at("t0");
      r.t1 = jr.at("t1");
      r.truncated = jr.at("truncated");
      b.regions.push_back(r);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, mpath.string() + ": " + e.what());
  }
  return b;
}

}  // namespace cmc
