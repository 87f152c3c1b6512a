#include "crnobs/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "crnobs/errors.hpp"
#include "crnobs/linalg.hpp"

namespace crnobs {

namespace {

// Strong connectivity of the subgraph induced by `block`: every node reachable
// from the first one both along edges and along reversed edges.
bool StronglyConnected(const Eigen::MatrixXd& a, const std::vector<int>& block) {
  if (block.size() <= 1) return true;
  auto reach = [&](bool reversed) {
    std::vector<char> seen(a.rows(), 0);
    std::vector<int> stack{block.front()};
    seen[block.front()] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int i : block) {
        const double w = reversed ? a(j, i) : a(i, j);
        if (w > 0 && !seen[i]) {
          seen[i] = 1;
          ++count;
          stack.push_back(i);
        }
      }
    }
    return count == block.size();
  };
  return reach(false) && reach(true);
}

}  // namespace

Partition LinkageClasses(const Eigen::MatrixXd& rates) {
  const int m = static_cast<int>(rates.rows());
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j && rates(i, j) > 0) {
        const int ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  Partition blocks;
  std::map<int, int> block_of_root;
  for (int i = 0; i < m; ++i) {
    const int r = find(i);
    auto [it, inserted] = block_of_root.emplace(r, static_cast<int>(blocks.size()));
    if (inserted) blocks.emplace_back();
    blocks[it->second].push_back(i);
  }
  return blocks;
}

ReactionNetwork::ReactionNetwork(std::vector<std::string> species,
                                 Eigen::MatrixXi complexes, Eigen::MatrixXd rates,
                                 bool no_boundary_equilibria_asserted)
    : species_(std::move(species)),
      complexes_(std::move(complexes)),
      rates_(std::move(rates)),
      no_boundary_(no_boundary_equilibria_asserted) {
  const Eigen::Index n = static_cast<Eigen::Index>(species_.size());
  const Eigen::Index m = complexes_.cols();
  if (complexes_.rows() != n) {
    throw DimensionMismatch("complex matrix has " + std::to_string(complexes_.rows()) +
                            " rows but there are " + std::to_string(n) + " species");
  }
  if (rates_.rows() != m || rates_.cols() != m) {
    throw DimensionMismatch("rate matrix must be " + std::to_string(m) + "x" +
                            std::to_string(m));
  }
  if (n == 0 || m == 0) throw ValidationError("network has no species or no complexes");
  if ((complexes_.array() < 0).any()) {
    throw ValidationError("complex exponents must be nonnegative integers");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if ((complexes_.row(k).array() == 0).all()) {
      throw ValidationError("species '" + species_[k] +
                            "' appears in no complex (zero row of B)");
    }
  }
  if (!rates_.allFinite() || (rates_.array() < 0).any()) {
    throw ValidationError("rate constants must be finite and nonnegative");
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (rates_(j, j) != 0) throw ValidationError("self-loop on complex " + std::to_string(j));
  }
  if (NumericalRank(complexes_.cast<double>()) != m) {
    throw ValidationError("complex matrix B must have full column rank m = " +
                          std::to_string(m));
  }
  linkage_ = LinkageClasses(rates_);
  class_of_.assign(m, -1);
  for (std::size_t s = 0; s < linkage_.size(); ++s) {
    if (linkage_[s].size() < 2) {
      throw ValidationError("complex " + std::to_string(linkage_[s][0]) +
                            " takes part in no reaction");
    }
    if (!StronglyConnected(rates_, linkage_[s])) {
      throw ValidationError("linkage class " + std::to_string(s) +
                            " is not strongly connected (block irreducibility)");
    }
    for (int j : linkage_[s]) class_of_[j] = static_cast<int>(s);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (rates_(i, j) > 0) {
        edges_.push_back({static_cast<int>(j), static_cast<int>(i), rates_(i, j)});
      }
    }
  }
}

int ReactionNetwork::species_index(std::string_view name) const {
  for (std::size_t k = 0; k < species_.size(); ++k) {
    if (species_[k] == name) return static_cast<int>(k);
  }
  return -1;
}

StoichSubspace StoichBasis(const ReactionNetwork& net) {
  const int n = net.num_species();
  const int m = net.num_complexes();
  const int classes = net.num_linkage_classes();
  const Eigen::MatrixXd b = net.complexes().cast<double>();
  StoichSubspace sub;
  sub.d0.resize(m - classes, n);
  int row = 0;
  for (const auto& block : net.linkage()) {
    for (std::size_t k = 1; k < block.size(); ++k) {
      sub.d0.row(row++) = (b.col(block[k]) - b.col(block[0])).transpose();
    }
  }
  if (NumericalRank(sub.d0) != m - classes) {
    throw DimensionMismatch("stoichiometric subspace has dimension " +
                            std::to_string(NumericalRank(sub.d0)) + ", expected m - L = " +
                            std::to_string(m - classes));
  }
  sub.q = NullspaceRows(sub.d0);
  sub.num_complexes = m;
  sub.num_linkage_classes = classes;
  return sub;
}

Eigen::VectorXd ConservedQuantities(const Eigen::MatrixXd& q, const Eigen::VectorXd& x) {
  if (q.cols() != x.size()) {
    throw DimensionMismatch("state has length " + std::to_string(x.size()) +
                            ", conservation basis expects " + std::to_string(q.cols()));
  }
  return q * x;
}

Eigen::VectorXd ConservedQuantities(const ReactionNetwork& net, const Eigen::VectorXd& x) {
  return ConservedQuantities(StoichBasis(net).q, x);
}

// ---------------------------------------------------------------------------
// DSL parser

namespace {

using ComplexTerms = std::map<int, int>;  // species index -> coefficient

class LineCursor {
 public:
  LineCursor(std::string_view text, int line) : text_(text), line_(line) {}

  void SkipSpace() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\r')) {
      ++pos_;
    }
  }
  bool AtEnd() {
    SkipSpace();
    return pos_ >= text_.size();
  }
  char Peek() {
    SkipSpace();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool Consume(std::string_view token) {
    SkipSpace();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }
  int column() const { return static_cast<int>(pos_) + 1; }
  [[noreturn]] void Fail(const std::string& message) const {
    throw ParseError(message, line_, column());
  }
  [[noreturn]] void FailAt(const std::string& message, int column) const {
    throw ParseError(message, line_, column);
  }

  std::optional<std::string> Identifier() {
    SkipSpace();
    if (pos_ >= text_.size() || !std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      return std::nullopt;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::optional<int> Integer() {
    SkipSpace();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (pos_ == start) return std::nullopt;
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  double Real() {
    SkipSpace();
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double value = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) Fail("expected a rate constant");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return value;
  }

 private:
  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

class DslParser {
 public:
  ReactionNetwork Parse(std::string_view text) {
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      std::string_view line = text.substr(start, end - start);
      const std::size_t hash = line.find('#');
      if (hash != std::string_view::npos) line = line.substr(0, hash);
      ParseLine(line, line_no);
      start = end + 1;
    }
    if (complexes_.empty()) throw ParseError("no reactions found", line_no, 1);
    return Build();
  }

 private:
  void ParseLine(std::string_view line, int line_no) {
    LineCursor cur(line, line_no);
    if (cur.AtEnd()) return;
    if (cur.Consume("species:")) {
      if (!species_.empty()) cur.Fail("species must be declared before use, once");
      declared_species_ = true;
      while (!cur.AtEnd()) {
        const int col = cur.column();
        auto name = cur.Identifier();
        if (!name) cur.Fail("expected a species name");
        if (Lookup(*name) >= 0) cur.FailAt("species '" + *name + "' declared twice", col);
        species_.push_back(*name);
        cur.Consume(",");
      }
      return;
    }
    if (cur.Consume("complexes:")) {
      if (!complexes_.empty()) cur.Fail("complexes must be declared before any reaction");
      while (!cur.AtEnd()) {
        const int col = cur.column();
        const int j = InternComplex(ParseComplex(cur));
        if (j != static_cast<int>(complexes_.size()) - 1) {
          cur.FailAt("complex declared twice", col);
        }
        if (!cur.Consume(",") && !cur.AtEnd()) cur.Fail("expected ',' between complexes");
      }
      return;
    }
    if (cur.Consume("assume")) {
      if (!cur.Consume("no_boundary_equilibria") || !cur.AtEnd()) {
        cur.Fail("unknown assumption (expected 'assume no_boundary_equilibria')");
      }
      no_boundary_ = true;
      return;
    }

    const int lhs = InternComplex(ParseComplex(cur));
    const int arrow_col = cur.column();
    bool reversible = false;
    if (cur.Consume("<->")) {
      reversible = true;
    } else if (!cur.Consume("->")) {
      cur.Fail("expected '->' or '<->'");
    }
    const int rhs = InternComplex(ParseComplex(cur));
    if (lhs == rhs) cur.FailAt("reaction from a complex to itself", arrow_col);
    if (!cur.Consume("[")) cur.Fail("expected '[' starting the rate list");
    std::vector<std::pair<double, int>> ks;
    do {
      const int col = cur.column();
      ks.emplace_back(cur.Real(), col);
    } while (cur.Consume(","));
    if (!cur.Consume("]")) cur.Fail("expected ']' closing the rate list");
    if (!cur.AtEnd()) cur.Fail("unexpected trailing text");
    const std::size_t want = reversible ? 2 : 1;
    if (ks.size() != want) {
      cur.FailAt(reversible ? "'<->' takes two rate constants [forward, backward]"
                            : "'->' takes one rate constant",
                 arrow_col);
    }
    for (const auto& [k, col] : ks) {
      if (!(k > 0) || !std::isfinite(k)) {
        cur.FailAt("rate constants must be positive and finite", col);
      }
    }
    AddEdge(lhs, rhs, ks[0].first, cur, arrow_col);
    if (reversible) AddEdge(rhs, lhs, ks[1].first, cur, arrow_col);
  }

  ComplexTerms ParseComplex(LineCursor& cur) {
    ComplexTerms terms;
    do {
      const int col = cur.column();
      int coef = 1;
      if (auto c = cur.Integer()) {
        coef = *c;
        if (coef <= 0) cur.FailAt("stoichiometric coefficients must be positive", col);
        cur.Consume("*");
      }
      const int name_col = cur.column();
      auto name = cur.Identifier();
      if (!name) cur.Fail("expected a species name");
      int k = Lookup(*name);
      if (k < 0) {
        if (declared_species_) cur.FailAt("unknown species '" + *name + "'", name_col);
        species_.push_back(*name);
        k = static_cast<int>(species_.size()) - 1;
      }
      terms[k] += coef;
    } while (cur.Peek() == '+' && cur.Consume("+"));
    return terms;
  }

  int Lookup(const std::string& name) const {
    for (std::size_t k = 0; k < species_.size(); ++k) {
      if (species_[k] == name) return static_cast<int>(k);
    }
    return -1;
  }

  int InternComplex(const ComplexTerms& terms) {
    for (std::size_t j = 0; j < complexes_.size(); ++j) {
      if (complexes_[j] == terms) return static_cast<int>(j);
    }
    complexes_.push_back(terms);
    return static_cast<int>(complexes_.size()) - 1;
  }

  void AddEdge(int from, int to, double k, const LineCursor& cur, int col) {
    for (const auto& e : edges_) {
      if (e.source == from && e.target == to) cur.FailAt("duplicate reaction", col);
    }
    edges_.push_back({from, to, k});
  }

  ReactionNetwork Build() const {
    const int n = static_cast<int>(species_.size());
    const int m = static_cast<int>(complexes_.size());
    Eigen::MatrixXi b = Eigen::MatrixXi::Zero(n, m);
    for (int j = 0; j < m; ++j) {
      for (const auto& [k, coef] : complexes_[j]) b(k, j) = coef;
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (const auto& e : edges_) a(e.target, e.source) = e.rate;
    return ReactionNetwork(species_, std::move(b), std::move(a), no_boundary_);
  }

  std::vector<std::string> species_;
  bool declared_species_ = false;
  bool no_boundary_ = false;
  std::vector<ComplexTerms> complexes_;
  std::vector<ReactionEdge> edges_;
};

std::string FormatRate(double k) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", k);
  return buf;
}

std::string FormatComplex(const ReactionNetwork& net, int j) {
  std::string out;
  for (int k = 0; k < net.num_species(); ++k) {
    const int coef = net.complexes()(k, j);
    if (coef == 0) continue;
    if (!out.empty()) out += " + ";
    if (coef != 1) out += std::to_string(coef) + "*";
    out += net.species()[k];
  }
  return out;
}

}  // namespace

ReactionNetwork ParseNetwork(std::string_view text) { return DslParser().Parse(text); }

ReactionNetwork LoadNetwork(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseNetwork(ss.str());
}

std::string ToDsl(const ReactionNetwork& net) {
  std::string out = "species:";
  for (std::size_t k = 0; k < net.species().size(); ++k) {
    out += (k ? ", " : " ") + net.species()[k];
  }
  out += "\ncomplexes:";
  for (int j = 0; j < net.num_complexes(); ++j) {
    out += (j ? ", " : " ") + FormatComplex(net, j);
  }
  out += "\n";
  if (net.no_boundary_equilibria_asserted()) out += "assume no_boundary_equilibria\n";
  const auto& a = net.rates();
  for (int j = 0; j < net.num_complexes(); ++j) {
    for (int i = 0; i < net.num_complexes(); ++i) {
      if (a(i, j) <= 0) continue;
      if (a(j, i) > 0) {
        if (j < i) {
          out += FormatComplex(net, j) + " <-> " + FormatComplex(net, i) + " [" +
                 FormatRate(a(i, j)) + ", " + FormatRate(a(j, i)) + "]\n";
        }
      } else {
        out += FormatComplex(net, j) + " -> " + FormatComplex(net, i) + " [" +
               FormatRate(a(i, j)) + "]\n";
      }
    }
  }
  return out;
}

nlohmann::json ToJson(const ReactionNetwork& net) {
  nlohmann::json doc;
  doc["species"] = net.species();
  auto rows = [](const auto& mat) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
      out.push_back(row);
    }
    return out;
  };
  doc["B"] = rows(net.complexes());
  doc["A"] = rows(net.rates());
  doc["linkage"] = net.linkage();
  doc["no_boundary_equilibria"] = net.no_boundary_equilibria_asserted();
  return doc;
}

ReactionNetwork NetworkFromJson(const nlohmann::json& doc) {
  const auto species = doc.at("species").get<std::vector<std::string>>();
  const auto b_rows = doc.at("B").get<std::vector<std::vector<int>>>();
  const auto a_rows = doc.at("A").get<std::vector<std::vector<double>>>();
  const Eigen::Index n = static_cast<Eigen::Index>(b_rows.size());
  const Eigen::Index m = n ? static_cast<Eigen::Index>(b_rows[0].size()) : 0;
  Eigen::MatrixXi b(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(b_rows[i].size()) != m) {
      throw DimensionMismatch("ragged B matrix");
    }
    for (Eigen::Index j = 0; j < m; ++j) b(i, j) = b_rows[i][j];
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(a_rows.size()), m);
  for (std::size_t i = 0; i < a_rows.size(); ++i) {
    if (static_cast<Eigen::Index>(a_rows[i].size()) != m) {
      throw DimensionMismatch("ragged A matrix");
    }
    for (Eigen::Index j = 0; j < m; ++j) a(static_cast<Eigen::Index>(i), j) = a_rows[i][j];
  }
  return ReactionNetwork(species, std::move(b), std::move(a),
                         doc.value("no_boundary_equilibria", false));
}

}  // namespace crnobs
