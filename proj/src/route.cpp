#include "unispace/wire/route.hpp"

#include "unispace/error.hpp"

namespace uni {

std::string_view to_string(Transport t) noexcept { return t == Transport::Tcp ? "tcp" : "loopback"; }

Route route_select(const Portal& portal, const DomainId& local) {
  Route r;
  r.dialect = portal.interface_agent_hint;
  if (!portal.target.endpoint.remote && portal.target.target.domain == local) return r;
  if (portal.comm_agent.protocol != "tcp" || portal.comm_agent.address.empty())
    fail(Errc::NoRoute, portal.sign.name);
  r.transport = Transport::Tcp;
  r.address = portal.comm_agent.address;
  return r;
}

}  // namespace uni
