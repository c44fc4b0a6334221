#include "gnninject/models/architecture.hpp"

#include <string>

#include "gnninject/core/errors.hpp"

namespace gnninject {

GnnArchitecture GnnArchitecture::defaults(ArchKind kind) {
  GnnArchitecture a;
  a.kind = kind;
  switch (kind) {
    case ArchKind::kGcn:
    case ArchKind::kSurrogate:
      a.layers = 2;
      break;
    case ArchKind::kSgc:
      a.layers = 1;
      a.power = 2;
      break;
    case ArchKind::kTagcn:
      a.layers = 2;
      a.power = 3;
      break;
    case ArchKind::kGcnii:
      a.layers = 8;
      break;
  }
  return a;
}

bool GnnArchitecture::two_hop_local() const {
  switch (kind) {
    case ArchKind::kGcn:
      return layers == 2;
    case ArchKind::kSgc:
      return power == 2;
    case ArchKind::kSurrogate:
      return true;
    default:
      return false;
  }
}

void GnnArchitecture::validate() const {
  if (layers == 0) throw ValidationError("architecture needs at least one layer");
  if (hidden == 0) throw ValidationError("architecture needs a positive hidden width");
}

std::string_view arch_name(ArchKind kind) {
  switch (kind) {
    case ArchKind::kGcn:
      return "gcn";
    case ArchKind::kSgc:
      return "sgc";
    case ArchKind::kTagcn:
      return "tagcn";
    case ArchKind::kGcnii:
      return "gcnii";
    case ArchKind::kSurrogate:
      return "surrogate";
  }
  return "?";
}

ArchKind parse_arch(std::string_view name) {
  for (ArchKind k : {ArchKind::kGcn, ArchKind::kSgc, ArchKind::kTagcn, ArchKind::kGcnii, ArchKind::kSurrogate}) {
    if (arch_name(k) == name) return k;
  }
  throw UsageError("unknown architecture '" + std::string(name) + "' (expected gcn|sgc|tagcn|gcnii|surrogate)");
}

}  // namespace gnninject
