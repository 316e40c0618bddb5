#pragma once

#include <string>

#include "unispace/portal/portal.hpp"

namespace uni {

enum class Transport { Loopback, Tcp };

struct Route {
  Transport transport = Transport::Loopback;
  std::string address;
  std::string dialect = "render-tree/1";
  bool operator==(const Route&) const = default;
};

std::string_view to_string(Transport t) noexcept;

/// Loopback when the target lives in `local`; Tcp to the portal's
/// communication agent otherwise. Throws NoRoute.
Route route_select(const Portal& portal, const DomainId& local);

}  // namespace uni
