#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace crnobs {

/// Blocks of complex indices (0-based), ordered by smallest member.
using Partition = std::vector<std::vector<int>>;

/// A directed edge j -> i of the complex graph with rate a_ij > 0.
struct ReactionEdge {
  int source;
  int target;
  double rate;
};

/// A validated zero-deficiency mass-action network in (A, B) form.
///
/// Column j of `complexes()` is the exponent vector b_j of complex j; entry
/// (i, j) of `rates()` is the rate constant of the edge j -> i. Instances are
/// immutable once constructed and every constructor validates:
///   - B has full column rank and no zero row,
///   - A is nonnegative with zero diagonal,
///   - each linkage class of A is strongly connected.
class ReactionNetwork {
 public:
  ReactionNetwork(std::vector<std::string> species, Eigen::MatrixXi complexes,
                  Eigen::MatrixXd rates,
                  bool no_boundary_equilibria_asserted = false);

  int num_species() const { return static_cast<int>(species_.size()); }
  int num_complexes() const { return static_cast<int>(complexes_.cols()); }
  int num_linkage_classes() const { return static_cast<int>(linkage_.size()); }

  const std::vector<std::string>& species() const { return species_; }
  const Eigen::MatrixXi& complexes() const { return complexes_; }
  const Eigen::MatrixXd& rates() const { return rates_; }
  const Partition& linkage() const { return linkage_; }
  const std::vector<ReactionEdge>& edges() const { return edges_; }

  /// Index of the linkage class containing complex `j`.
  int linkage_class_of(int j) const { return class_of_[j]; }

  /// User assertion that no positive stoichiometric class carries a boundary
  /// equilibrium. Not verified; required by find_equilibrium.
  bool no_boundary_equilibria_asserted() const { return no_boundary_; }

  int species_index(std::string_view name) const;

 private:
  std::vector<std::string> species_;
  Eigen::MatrixXi complexes_;
  Eigen::MatrixXd rates_;
  bool no_boundary_;
  Partition linkage_;
  std::vector<int> class_of_;
  std::vector<ReactionEdge> edges_;
};

/// Bases of the stoichiometric subspace and of its orthogonal complement.
struct StoichSubspace {
  Eigen::MatrixXd d0;  ///< (m-L) x n, rows span the stoichiometric subspace.
  Eigen::MatrixXd q;   ///< (n-(m-L)) x n, orthonormal rows spanning its complement.
  int num_complexes = 0;
  int num_linkage_classes = 0;
};

/// Connected components of the undirected skeleton of G(A).
Partition LinkageClasses(const Eigen::MatrixXd& rates);

/// D0 rows are b_j - b_first over the non-first members j of every linkage
/// class. Throws DimensionMismatch when the span is not (m - L)-dimensional.
StoichSubspace StoichBasis(const ReactionNetwork& net);

/// Q * x, using the orthonormal complement basis of `net`.
Eigen::VectorXd ConservedQuantities(const ReactionNetwork& net,
                                    const Eigen::VectorXd& x);

/// Q * x for an explicit complement basis.
Eigen::VectorXd ConservedQuantities(const Eigen::MatrixXd& q,
                                    const Eigen::VectorXd& x);

/// Parses the reaction DSL. See README for the grammar.
ReactionNetwork ParseNetwork(std::string_view text);

/// Reads and parses a DSL file.
ReactionNetwork LoadNetwork(const std::string& path);

/// Renders `net` as DSL text that parses back to the same (A, B).
std::string ToDsl(const ReactionNetwork& net);

nlohmann::json ToJson(const ReactionNetwork& net);
ReactionNetwork NetworkFromJson(const nlohmann::json& doc);

}  // namespace crnobs
