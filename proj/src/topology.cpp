// SPDX-License-Identifier: Apache-2.0
#include "deapsim/topology.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

constexpr std::array<std::pair<TopologyKind, std::string_view>, 6> kKindNames{{
    {TopologyKind::Torus2D, "2D-torus"},
    {TopologyKind::Torus3D, "3D-torus"},
    {TopologyKind::Mesh2D, "2D-mesh"},
    {TopologyKind::Disconnected, "disconnected"},
    {TopologyKind::Random, "random"},
    {TopologyKind::Custom, "custom"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class TopologyBuilder {
 public:
  explicit TopologyBuilder(int n) : adj_(static_cast<std::size_t>(n)) {}

  bool has(int a, int b) const { return adj_[a].count(b) > 0; }
  int degree(int a) const { return static_cast<int>(adj_[a].size()); }

  void link(int a, int b) {
    if (a == b) return;
    adj_[a].insert(b);
    adj_[b].insert(a);
  }

  Topology build(TopologyKind kind, int dimension) const {
    Topology t;
    t.kind = kind;
    t.dimension = dimension;
    for (std::size_t i = 0; i < adj_.size(); ++i) {
      ChipNode node;
      node.chip_id = static_cast<ChipId>(i);
      node.connected_chip_id.assign(adj_[i].begin(), adj_[i].end());
      node.connected_chip_distance.assign(adj_[i].size(), 1.0);
      t.chips.push_back(std::move(node));
    }
    return t;
  }

 private:
  std::vector<std::set<int>> adj_;
};

// Boustrophedon numbering over a row-major grid: every other row (and, in 3D,
// every other plane) is traversed in reverse.
int snake_id(std::span<const int> dims, std::span<const int> coord) {
  if (dims.size() == 1) return coord[0];
  if (dims.size() == 2) {
    const int c = (coord[0] % 2 == 0) ? coord[1] : dims[1] - 1 - coord[1];
    return coord[0] * dims[1] + c;
  }
  const int plane = dims[1] * dims[2];
  std::array<int, 2> inner{coord[1], coord[2]};
  if (coord[0] % 2 == 1) inner[0] = dims[1] - 1 - inner[0];
  return coord[0] * plane + snake_id(dims.subspan(1), inner);
}

void for_each_coord(std::span<const int> dims, const std::function<void(std::span<const int>)>& fn) {
  std::vector<int> coord(dims.size(), 0);
  const int total = std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
  for (int n = 0; n < total; ++n) {
    fn(coord);
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
      if (++coord[d] < dims[d]) break;
      coord[d] = 0;
    }
  }
}

std::string format_distance(double d) {
  if (d == std::floor(d) && std::abs(d) < 1e15) return fmt::format("{}", static_cast<long long>(d));
  return fmt::format("{}", d);
}

// ---- parsing --------------------------------------------------------------

struct Token {
  enum Kind { LBrace, RBrace, Colon, Comma, Semi, Word, End } kind;
  std::string text;
  int line;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= text_.size()) return {Token::End, "", line_};
    const char c = text_[pos_];
    switch (c) {
      case '{': ++pos_; return {Token::LBrace, "{", line_};
      case '}': ++pos_; return {Token::RBrace, "}", line_};
      case ':': ++pos_; return {Token::Colon, ":", line_};
      case ',': ++pos_; return {Token::Comma, ",", line_};
      case ';': ++pos_; return {Token::Semi, ";", line_};
      default: break;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '{' || d == '}' || d == ':' || d == ',' ||
          d == ';' || d == '#') {
        break;
      }
      ++pos_;
    }
    return {Token::Word, std::string(text_.substr(start, pos_ - start)), line_};
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

struct Value {
  std::vector<std::string> items;  // scalar = one item
  bool is_list = false;
  int line = 0;
};

using Block = std::vector<std::pair<std::string, Value>>;

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { advance(); }

  std::vector<std::pair<Block, int>> blocks() {
    std::vector<std::pair<Block, int>> out;
    while (tok_.kind != Token::End) {
      if (tok_.kind == Token::Semi) {
        advance();
        continue;
      }
      const int line = tok_.line;
      expect(Token::LBrace, "'{' to open a block");
      out.emplace_back(block_body(), line);
    }
    return out;
  }

 private:
  void advance() { tok_ = lexer_.next(); }

  void expect(Token::Kind kind, const char* what) {
    if (tok_.kind != kind) {
      throw ParseError(fmt::format("expected {}, found '{}'", what, tok_.kind == Token::End ? "end of input" : tok_.text),
                       tok_.line);
    }
    advance();
  }

  Block block_body() {
    Block b;
    while (tok_.kind != Token::RBrace) {
      if (tok_.kind != Token::Word) expect(Token::Word, "a field name or '}'");
      std::string key = tok_.text;
      advance();
      expect(Token::Colon, "':'");
      Value v;
      v.line = tok_.line;
      if (tok_.kind == Token::LBrace) {
        advance();
        v.is_list = true;
        while (tok_.kind != Token::RBrace) {
          if (tok_.kind != Token::Word) expect(Token::Word, "a list element");
          v.items.push_back(tok_.text);
          advance();
          if (tok_.kind == Token::Comma) advance();
          else if (tok_.kind != Token::RBrace) expect(Token::RBrace, "',' or '}'");
        }
        advance();
      } else {
        if (tok_.kind != Token::Word) expect(Token::Word, "a value");
        v.items.push_back(tok_.text);
        advance();
      }
      b.emplace_back(std::move(key), std::move(v));
      if (tok_.kind == Token::Comma || tok_.kind == Token::Semi) advance();
    }
    advance();
    return b;
  }

  Lexer lexer_;
  Token tok_{Token::End, "", 1};
};

const Value* field(const Block& b, std::string_view key) {
  for (const auto& [k, v] : b) {
    if (lower(k) == lower(key)) return &v;
  }
  return nullptr;
}

const Value& required(const Block& b, std::string_view key, int block_line) {
  const Value* v = field(b, key);
  if (!v) throw ParseError(fmt::format("missing field '{}'", key), block_line);
  return *v;
}

long long to_int(const std::string& s, int line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(fmt::format("expected an integer, found '{}'", s), line);
  return v;
}

double to_double(const std::string& s, int line) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(fmt::format("expected a number, found '{}'", s), line);
  return v;
}

const std::string& scalar(const Value& v) {
  if (v.is_list || v.items.size() != 1) throw ParseError("expected a scalar value", v.line);
  return v.items.front();
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "custom";
}

TopologyKind topology_kind_from_string(std::string_view name) {
  const std::string n = lower(name);
  for (const auto& [k, known] : kKindNames) {
    if (n == lower(known)) return k;
  }
  if (n == "torus2d") return TopologyKind::Torus2D;
  if (n == "torus3d") return TopologyKind::Torus3D;
  if (n == "mesh2d") return TopologyKind::Mesh2D;
  if (n == "no-connection" || n == "none") return TopologyKind::Disconnected;
  throw ParseError("unknown topology kind '" + std::string(name) + "'");
}

int Topology::undirected_link_count() const {
  int total = 0;
  for (const auto& c : chips) total += static_cast<int>(c.connected_chip_id.size());
  return total / 2;
}

void Topology::validate() const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const auto& c = chips[i];
    if (c.chip_id != i) throw ParseError(fmt::format("chip at position {} has id {}, expected {}", i, c.chip_id, i));
    if (c.connected_chip_id.size() != c.connected_chip_distance.size()) {
      throw ParseError(fmt::format("chip {}: {} neighbors but {} distances", i, c.connected_chip_id.size(),
                                   c.connected_chip_distance.size()));
    }
    std::set<ChipId> seen;
    for (std::size_t k = 0; k < c.connected_chip_id.size(); ++k) {
      const ChipId j = c.connected_chip_id[k];
      const double d = c.connected_chip_distance[k];
      if (j < 0 || j >= n) throw ParseError(fmt::format("chip {}: neighbor {} out of range [0, {})", i, j, n));
      if (j == i) throw ParseError(fmt::format("chip {}: self-link", i));
      if (!seen.insert(j).second) throw ParseError(fmt::format("chip {}: duplicate neighbor {}", i, j));
      if (!(d > 0.0) || !std::isfinite(d)) throw ParseError(fmt::format("chip {}: distance to {} must be positive", i, j));
      const auto& back = chips[j].connected_chip_id;
      auto it = std::find(back.begin(), back.end(), i);
      if (it == back.end()) {
        throw ParseError(fmt::format("asymmetric link: chip {} lists {} but chip {} does not list {}", i, j, j, i));
      }
      const double back_d = chips[j].connected_chip_distance[static_cast<std::size_t>(it - back.begin())];
      if (back_d != d) {
        throw ParseError(fmt::format("asymmetric distance between chips {} and {} ({} vs {})", i, j, d, back_d));
      }
    }
  }
}

Topology generate_topology(TopologyKind kind, std::span<const int> dims) {
  auto require_dims = [&](std::size_t n) {
    if (dims.size() != n) {
      throw ConfigError(fmt::format("{} needs {} dims, got {}", to_string(kind), n, dims.size()));
    }
  };
  if (dims.empty()) throw ConfigError("topology dims must not be empty");
  for (int d : dims) {
    if (d < 1) throw ConfigError("topology dims must be >= 1");
  }
  const int n = std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
  TopologyBuilder b(n);

  bool wrap = true;
  switch (kind) {
    case TopologyKind::Torus2D: require_dims(2); break;
    case TopologyKind::Torus3D: require_dims(3); break;
    case TopologyKind::Mesh2D: require_dims(2); wrap = false; break;
    case TopologyKind::Disconnected: return b.build(kind, static_cast<int>(dims.size()));
    case TopologyKind::Random:
    case TopologyKind::Custom:
      throw ConfigError(fmt::format("{} topologies cannot be generated from dims", to_string(kind)));
  }

  for_each_coord(dims, [&](std::span<const int> coord) {
    const int self = snake_id(dims, coord);
    std::vector<int> other(coord.begin(), coord.end());
    for (std::size_t d = 0; d < dims.size(); ++d) {
      for (int step : {-1, 1}) {
        int v = coord[d] + step;
        if (v < 0 || v >= dims[d]) {
          if (!wrap) continue;
          v = (v + dims[d]) % dims[d];
        }
        other[d] = v;
        b.link(self, snake_id(dims, other));
        other[d] = coord[d];
      }
    }
  });
  return b.build(kind, static_cast<int>(dims.size()));
}

Topology random_topology(int max_chips, int link_budget, Rng& rng) {
  if (max_chips < 2) throw ConfigError("max_chips must be >= 2");
  if (link_budget < 1) throw ConfigError("link budget must be >= 1");
  const int n = uniform_int(rng, 2, max_chips);
  TopologyBuilder b(n);

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 1; i < n; ++i) b.link(perm[i], perm[uniform_int(rng, 0, i - 1)]);

  const int attempts = n * link_budget;
  for (int k = 0; k < attempts; ++k) {
    const int a = uniform_int(rng, 0, n - 1);
    const int c = uniform_int(rng, 0, n - 1);
    if (a == c || b.has(a, c)) continue;
    if (b.degree(a) >= link_budget || b.degree(c) >= link_budget) continue;
    b.link(a, c);
  }
  return b.build(TopologyKind::Random, 0);
}

double link_bandwidth(const LinkBandwidthTable& table, int links_on_chip) {
  if (links_on_chip <= 0 || table.by_link_count.empty()) return table.nic_GBps;
  auto it = table.by_link_count.upper_bound(links_on_chip);
  if (it == table.by_link_count.begin()) return it->second;  // below the smallest key
  return std::prev(it)->second;
}

std::optional<Path> shortest_path(const Topology& topology, ChipId src, ChipId dst) {
  const int n = topology.size();
  if (src < 0 || src >= n || dst < 0 || dst >= n) {
    throw ConfigError(fmt::format("chip id out of range: {} -> {} (size {})", src, dst, n));
  }
  // Dijkstra from dst; then walk greedily from src along the smallest-id tight edge.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> to_dst(static_cast<std::size_t>(n), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  to_dst[dst] = 0.0;
  pq.emplace(0.0, dst);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > to_dst[u]) continue;
    const auto& node = topology.chips[u];
    for (std::size_t k = 0; k < node.connected_chip_id.size(); ++k) {
      const int v = node.connected_chip_id[k];
      const double nd = d + node.connected_chip_distance[k];
      if (nd < to_dst[v]) {
        to_dst[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  if (to_dst[src] == kInf) return std::nullopt;

  Path path{to_dst[src], {src}};
  int u = src;
  while (u != dst) {
    const auto& node = topology.chips[u];
    int best = -1;
    for (std::size_t k = 0; k < node.connected_chip_id.size(); ++k) {
      const int v = node.connected_chip_id[k];
      const double via = node.connected_chip_distance[k] + to_dst[v];
      const double tol = 1e-12 * std::max(1.0, to_dst[u]);
      if (std::abs(via - to_dst[u]) <= tol && (best < 0 || v < best)) best = v;
    }
    u = best;
    path.chips.push_back(u);
  }
  return path;
}

RoutingTable::RoutingTable(const Topology& topology)
    : size_(topology.size()), dist_(static_cast<std::size_t>(size_) * size_, -1.0) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  using Item = std::pair<double, int>;
  for (int s = 0; s < size_; ++s) {
    std::vector<double> d(static_cast<std::size_t>(size_), kInf);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[s] = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      auto [du, u] = pq.top();
      pq.pop();
      if (du > d[u]) continue;
      const auto& node = topology.chips[u];
      for (std::size_t k = 0; k < node.connected_chip_id.size(); ++k) {
        const int v = node.connected_chip_id[k];
        const double nd = du + node.connected_chip_distance[k];
        if (nd < d[v]) {
          d[v] = nd;
          pq.emplace(nd, v);
        }
      }
    }
    for (int t = 0; t < size_; ++t) {
      if (d[t] != kInf) dist_[static_cast<std::size_t>(s) * size_ + t] = d[t];
    }
  }
}

std::optional<double> RoutingTable::distance(ChipId src, ChipId dst) const {
  const double d = dist_.at(static_cast<std::size_t>(src) * size_ + dst);
  if (d < 0.0) return std::nullopt;
  return d;
}

std::string emit_topology(const Topology& topology) {
  std::string out = fmt::format("{{\n  Topology: {}\n  Size: {}\n  Dimension: {}\n}};\n", to_string(topology.kind),
                                topology.size(), topology.dimension);
  for (const auto& c : topology.chips) {
    std::vector<std::string> dists;
    for (double d : c.connected_chip_distance) dists.push_back(format_distance(d));
    out += fmt::format("{{\n  Chip_id: {}\n  Connected_chip_id: {{{}}}\n  Connected_chip_distance: {{{}}}\n}}\n",
                       c.chip_id, fmt::join(c.connected_chip_id, ", "), fmt::join(dists, ", "));
  }
  return out;
}

Topology parse_topology(std::string_view text) {
  Parser parser(text);
  auto blocks = parser.blocks();
  if (blocks.empty()) throw ParseError("empty topology description", 1);

  const auto& [header, header_line] = blocks.front();
  Topology t;
  t.kind = topology_kind_from_string(scalar(required(header, "Topology", header_line)));
  const auto& size_v = required(header, "Size", header_line);
  const long long size = to_int(scalar(size_v), size_v.line);
  const auto& dim_v = required(header, "Dimension", header_line);
  t.dimension = static_cast<int>(to_int(scalar(dim_v), dim_v.line));

  if (size < 0) throw ParseError("Size must be >= 0", size_v.line);
  if (static_cast<long long>(blocks.size() - 1) != size) {
    throw ParseError(fmt::format("Size is {} but {} chip blocks follow", size, blocks.size() - 1), size_v.line);
  }
  t.chips.resize(static_cast<std::size_t>(size));
  std::vector<bool> filled(static_cast<std::size_t>(size), false);
  for (std::size_t b = 1; b < blocks.size(); ++b) {
    const auto& [block, line] = blocks[b];
    const auto& id_v = required(block, "Chip_id", line);
    const long long id = to_int(scalar(id_v), id_v.line);
    if (id < 0 || id >= size) throw ParseError(fmt::format("Chip_id {} out of range", id), id_v.line);
    if (filled[id]) throw ParseError(fmt::format("duplicate Chip_id {}", id), id_v.line);
    filled[id] = true;

    ChipNode node;
    node.chip_id = static_cast<ChipId>(id);
    const auto& ids = required(block, "Connected_chip_id", line);
    for (const auto& s : ids.items) node.connected_chip_id.push_back(static_cast<ChipId>(to_int(s, ids.line)));
    const auto& ds = required(block, "Connected_chip_distance", line);
    for (const auto& s : ds.items) node.connected_chip_distance.push_back(to_double(s, ds.line));
    if (node.connected_chip_id.size() != node.connected_chip_distance.size()) {
      throw ParseError(fmt::format("chip {}: {} neighbors but {} distances", id, node.connected_chip_id.size(),
                                   node.connected_chip_distance.size()),
                       ds.line);
    }
    t.chips[id] = std::move(node);
  }
  t.validate();
  return t;
}

std::string describe_topology(TopologyKind kind, std::span<const int> dims) {
  std::string name;
  switch (kind) {
    case TopologyKind::Torus2D: name = "Torus2D"; break;
    case TopologyKind::Torus3D: name = "Torus3D"; break;
    case TopologyKind::Mesh2D: name = "Mesh2D"; break;
    case TopologyKind::Disconnected: name = "No-Connection"; break;
    case TopologyKind::Random: name = "Random"; break;
    case TopologyKind::Custom: name = "Custom"; break;
  }
  return fmt::format("{}:{}", name, fmt::join(dims, "x"));
}

}  // namespace deapsim
