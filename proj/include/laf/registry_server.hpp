#pragma once

#include <cstddef>
#include <string>

#include "laf/dcr.hpp"

namespace laf {

/// Minimal line-oriented lookup service over a local (AF_UNIX) socket.
/// Request:  `GET <id> <lang>\n`
/// Response: `OK\t<id>\t<kind>\t<name>\t<definition>\t<fallback 0|1>\n`
///       or  `ERR\t<message>\n`
/// Text fields are escaped with the dump escaping. One request per
/// connection. With max_requests > 0 the server exits after serving that
/// many connections (used by tests and scripted callers).
struct ServeOptions {
  std::string socket_path;
  std::size_t max_requests = 0;
};

void serve_registry(const Registry& reg, const ServeOptions& opts);

/// One-shot client for the protocol above. Returns the raw response line.
std::string registry_request(const std::string& socket_path,
                             const std::string& request_line);

}  // namespace laf
