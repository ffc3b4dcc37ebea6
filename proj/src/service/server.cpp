#include "slamhive/service.hpp"

// after Eigen: <resolv.h> defines a _res macro that clashes with Eigen internals
#include <httplib.h>

namespace slamhive::service {

struct Server::Impl {
  Api& api;
  httplib::Server http;
  std::thread thread;

  explicit Impl(Api& a) : api(a) {}
};

Server::Server(Api& api) : impl_(std::make_unique<Impl>(api)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    Request request{req.method, req.path, {}, req.body};
    for (const auto& [key, value] : req.params) request.query[key] = value;
    const auto response = impl_->api.handle(request);
    res.status = response.status;
    if (response.raw) {
      res.set_content(*response.raw, response.content_type);
    } else {
      res.set_content(response.body.dump(), "application/json");
    }
  };
  // httplib also sets SO_REUSEPORT, which would let a second server share a
  // bound port instead of failing
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  const std::string any = R"(/.*)";
  impl_->http.Get(any, handler);
  impl_->http.Post(any, handler);
  impl_->http.Put(any, handler);
  impl_->http.Delete(any, handler);
  impl_->http.Patch(any, handler);
}

Server::~Server() {
  stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Server::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::BindFailure, "cannot bind " + host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    throw Error(Errc::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void Server::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Server::stop() { impl_->http.stop(); }

}  // namespace slamhive::service
