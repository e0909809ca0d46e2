#include "laf/registry_server.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/util.hpp"

namespace laf {

namespace {

struct Fd {
  int fd = -1;
  explicit Fd(int fd) : fd(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

[[noreturn]] void sys_fail(const std::string& what) {
  throw Error(Errc::io_error, what + ": " + std::strerror(errno));
}

sockaddr_un make_addr(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() + 1 > sizeof(addr.sun_path)) {
    throw Error(Errc::io_error, "socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

std::string read_line(int fd) {
  std::string line;
  char c;
  while (true) {
    ssize_t n = ::read(fd, &c, 1);
    if (n <= 0) return line;
    if (c == '\n') return line;
    line += c;
    if (line.size() > 4096) return line;  // request lines are short
  }
}

void write_all(int fd, std::string_view bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
    if (n <= 0) return;
    off += static_cast<std::size_t>(n);
  }
}

std::string handle(const Registry& reg, const std::string& request) {
  auto fields = split(request, ' ');
  if (fields.size() != 3 || fields[0] != "GET") {
    return "ERR\texpected: GET <id> <lang>\n";
  }
  try {
    Registry::EntryView view = reg.lookup(fields[1], fields[2]);
    const char* kind =
        view.entry->kind == DataCategoryEntry::Kind::Descriptor ? "descriptor"
                                                                : "value";
    return "OK\t" + view.entry->id + "\t" + kind + "\t" + escape(view.name) +
           "\t" + escape(view.definition) + "\t" + (view.fallback ? "1" : "0") +
           "\n";
  } catch (const Error& e) {
    return "ERR\t" + escape(e.what()) + "\n";
  }
}

}  // namespace

void serve_registry(const Registry& reg, const ServeOptions& opts) {
  Fd server(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (server.fd < 0) sys_fail("socket");
  std::filesystem::remove(opts.socket_path);
  sockaddr_un addr = make_addr(opts.socket_path);
  if (::bind(server.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    sys_fail("bind " + opts.socket_path);
  }
  if (::listen(server.fd, 8) != 0) sys_fail("listen");
  std::size_t served = 0;
  while (opts.max_requests == 0 || served < opts.max_requests) {
    Fd conn(::accept(server.fd, nullptr, nullptr));
    if (conn.fd < 0) {
      if (errno == EINTR) continue;
      sys_fail("accept");
    }
    write_all(conn.fd, handle(reg, read_line(conn.fd)));
    ++served;
  }
  std::filesystem::remove(opts.socket_path);
}

std::string registry_request(const std::string& socket_path,
                             const std::string& request_line) {
  Fd conn(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (conn.fd < 0) sys_fail("socket");
  sockaddr_un addr = make_addr(socket_path);
  if (::connect(conn.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    sys_fail("connect " + socket_path);
  }
  std::string request = request_line;
  if (request.empty() || request.back() != '\n') request += '\n';
  write_all(conn.fd, request);
  std::string response = read_line(conn.fd);
  response += '\n';
  return response;
}

}  // namespace laf
