#include "unispace/error.hpp"

#include <array>
#include <utility>

namespace uni {
namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 36> kTokens{{
    {Errc::NotFound, "NOT_FOUND"},
    {Errc::AccessDenied, "ACCESS_DENIED"},
    {Errc::AlreadyMounted, "ALREADY_MOUNTED"},
    {Errc::NotMounted, "NOT_MOUNTED"},
    {Errc::SourceUnreachable, "SOURCE_UNREACHABLE"},
    {Errc::InvalidTemplate, "INVALID_TEMPLATE"},
    {Errc::CycleDetected, "CYCLE_DETECTED"},
    {Errc::LintFailed, "LINT_FAILED"},
    {Errc::PortalDangling, "PORTAL_DANGLING"},
    {Errc::AtRoot, "AT_ROOT"},
    {Errc::BadRecord, "BAD_RECORD"},
    {Errc::SignatureInvalid, "SIGNATURE_INVALID"},
    {Errc::WrongState, "WRONG_STATE"},
    {Errc::NoParent, "NO_PARENT"},
    {Errc::OpenChildren, "OPEN_CHILDREN"},
    {Errc::DepthLimit, "DEPTH_LIMIT"},
    {Errc::LeaseConflict, "LEASE_CONFLICT"},
    {Errc::ViewOnly, "VIEW_ONLY"},
    {Errc::StaleHandle, "STALE_HANDLE"},
    {Errc::EmptyClipboard, "EMPTY_CLIPBOARD"},
    {Errc::NotInTrash, "NOT_IN_TRASH"},
    {Errc::LogCorrupt, "LOG_CORRUPT"},
    {Errc::NotOwner, "NOT_OWNER"},
    {Errc::ScopeEscalation, "SCOPE_ESCALATION"},
    {Errc::Malformed, "MALFORMED"},
    {Errc::UnsupportedVersion, "UNSUPPORTED_VERSION"},
    {Errc::AuthFailed, "AUTH_FAILED"},
    {Errc::Unreachable, "UNREACHABLE"},
    {Errc::UnknownTool, "UNKNOWN_TOOL"},
    {Errc::NoRoute, "NO_ROUTE"},
    {Errc::BindFailed, "BIND_FAILED"},
    {Errc::Rejected, "REJECTED"},
    {Errc::LeasesOpen, "LEASES_OPEN"},
    {Errc::ArchiveCorrupt, "ARCHIVE_CORRUPT"},
    {Errc::ScriptParse, "SCRIPT_PARSE"},
    {Errc::InvalidArgument, "INVALID_ARGUMENT"},
}};

std::string compose(Errc code, const std::string& detail) {
  std::string out(to_token(code));
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}

}  // namespace

std::string_view to_token(Errc code) noexcept {
  for (const auto& [c, t] : kTokens)
    if (c == code) return t;
  return "MALFORMED";
}

Errc errc_from_token(std::string_view token) noexcept {
  for (const auto& [c, t] : kTokens)
    if (t == token) return c;
  return Errc::Malformed;
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(detail) {}

}  // namespace uni
