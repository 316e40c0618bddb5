#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uni {

/// Error tokens shared by every engine and by the wire protocol.
/// The token text is what goes on the wire and on the CLI's stderr.
enum class Errc {
  NotFound,
  AccessDenied,
  AlreadyMounted,
  NotMounted,
  SourceUnreachable,
  InvalidTemplate,
  CycleDetected,
  LintFailed,
  PortalDangling,
  AtRoot,
  BadRecord,
  SignatureInvalid,
  WrongState,
  NoParent,
  OpenChildren,
  DepthLimit,
  LeaseConflict,
  ViewOnly,
  StaleHandle,
  EmptyClipboard,
  NotInTrash,
  LogCorrupt,
  NotOwner,
  ScopeEscalation,
  Malformed,
  UnsupportedVersion,
  AuthFailed,
  Unreachable,
  UnknownTool,
  NoRoute,
  BindFailed,
  Rejected,
  LeasesOpen,
  ArchiveCorrupt,
  ScriptParse,
  InvalidArgument,
};

std::string_view to_token(Errc code) noexcept;
/// Inverse of to_token; unknown tokens map to Malformed.
Errc errc_from_token(std::string_view token) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail = {});

  Errc code() const noexcept { return code_; }
  std::string_view token() const noexcept { return to_token(code_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail = {}) {
  throw Error(code, detail);
}

}  // namespace uni
