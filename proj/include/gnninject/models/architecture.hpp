#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace gnninject {

enum class ArchKind { kGcn, kSgc, kTagcn, kGcnii, kSurrogate };

/// Architecture tag plus the constants each kind needs.
///   Gcn        softmax(Â relu(... relu(Â X W1) ...) WL), `layers` weight matrices
///   Sgc        softmax(Â^power X W)
///   Tagcn      2 layers of sum_{k<=power} Â^k H W_k with relu between
///   Gcnii      relu(X W_in), `layers` initial-residual/identity-map layers, linear head
///   Surrogate  softmax(Â² X W1 W2), no nonlinearity
struct GnnArchitecture {
  ArchKind kind = ArchKind::kGcn;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t power = 2;
  double alpha = 0.1;
  double lambda = 0.5;

  static GnnArchitecture defaults(ArchKind kind);

  /// True when every output row depends only on the 2-hop neighbourhood,
  /// which enables the local query path.
  bool two_hop_local() const;

  /// Throws ValidationError for layers == 0 or hidden == 0.
  void validate() const;
};

std::string_view arch_name(ArchKind kind);
/// Accepts gcn, sgc, tagcn, gcnii, surrogate. Throws UsageError otherwise.
ArchKind parse_arch(std::string_view name);

}  // namespace gnninject
