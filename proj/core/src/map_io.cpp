#include "btlab/map_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& tok, int line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

long parse_int(const std::string& tok, int line) {
  long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": bad integer '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_map(std::ostream& os, const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  if (g.inner_radius() > 0.0) {
    throw Error(ErrorCode::io, "annulus grids cannot be written in the v1 map format");
  }
  os << "BTLAB-MAP v1\n";
  os << g.dim() << ' ' << format_double(g.radius()) << ' ' << format_double(g.spacing()) << ' '
     << (g.half() ? 1 : 0) << ' ' << u.target_dim() << '\n';
  std::string line;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    line.clear();
    line += std::to_string(static_cast<int>(g.mask(i)));
    for (int k : g.index(i)) {
      line += ' ';
      line += std::to_string(k);
    }
    for (double v : u.at(i)) {
      line += ' ';
      line += format_double(v);
    }
    line += '\n';
    os << line;
  }
}

void write_map(const std::string& path, const DiscreteMap& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  write_map(os, u);
  if (!os) throw Error(ErrorCode::io, "write failed for " + path);
}

DiscreteMap read_map(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "BTLAB-MAP v1") {
    throw Error(ErrorCode::parse, "line 1: expected 'BTLAB-MAP v1'");
  }
  if (!std::getline(is, line)) throw Error(ErrorCode::parse, "line 2: missing grid descriptor");
  std::istringstream hs(line);
  std::string tn, tr, th, thalf, td, extra;
  if (!(hs >> tn >> tr >> th >> thalf >> td) || (hs >> extra)) {
    throw Error(ErrorCode::parse, "line 2: expected 'n r h half d'");
  }
  const int n = static_cast<int>(parse_int(tn, 2));
  const double r = parse_double(tr, 2);
  const double h = parse_double(th, 2);
  const long half = parse_int(thalf, 2);
  const int d = static_cast<int>(parse_int(td, 2));
  if (half != 0 && half != 1) throw Error(ErrorCode::parse, "line 2: half must be 0 or 1");
  if (d < 1) throw Error(ErrorCode::parse, "line 2: d must be positive");
  GridPtr grid;
  try {
    grid = make_grid(n, r, h, half == 1);
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("line 2: ") + e.what());
  }
  DiscreteMap u(grid, d);
  std::vector<std::string> tok;
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const int ln = static_cast<int>(i) + 3;
    if (!std::getline(is, line)) {
      throw Error(ErrorCode::parse, "line " + std::to_string(ln) + ": unexpected end of file");
    }
    std::istringstream ls(line);
    tok.clear();
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (static_cast<int>(tok.size()) != 1 + n + d) {
      throw Error(ErrorCode::parse, "line " + std::to_string(ln) + ": wrong number of fields");
    }
    if (parse_int(tok[0], ln) != static_cast<long>(grid->mask(i))) {
      throw Error(ErrorCode::parse, "line " + std::to_string(ln) + ": mask does not match grid");
    }
    const auto idx = grid->index(i);
    for (int a = 0; a < n; ++a) {
      if (parse_int(tok[1 + a], ln) != idx[a]) {
        throw Error(ErrorCode::parse, "line " + std::to_string(ln) + ": node index does not match grid");
      }
    }
    for (int c = 0; c < d; ++c) u.at(i)[c] = parse_double(tok[1 + n + c], ln);
  }
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw Error(ErrorCode::parse, "trailing content after last node");
    }
  }
  return u;
}

DiscreteMap read_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path);
  return read_map(is);
}

}  // namespace btlab
