#pragma once

// HTTP routes of the pair-labeling service (cpp-httplib).

#include <string>

#include "tfq/studio/pair_studio.hpp"

// After pair_studio.hpp (which pulls in Eigen): <resolv.h> from httplib
// defines a `_res` macro that collides with Eigen internals.
#include <httplib.h>

namespace tfq::studio {

inline void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

/// Registers every endpoint on `server`. `studio` must outlive the server.
inline void configure_routes(httplib::Server& server, PairStudio& studio) {
  server.Get("/api/images", [&](const httplib::Request&, httplib::Response& res) { reply(res, studio.list_images()); });
  server.Get("/api/session", [&](const httplib::Request&, httplib::Response& res) { reply(res, studio.session()); });
  server.Post("/api/pairs",
              [&](const httplib::Request& req, httplib::Response& res) { reply(res, studio.add_annotation(req.body)); });
  server.Get("/api/pairs", [&](const httplib::Request&, httplib::Response& res) { reply(res, studio.list_pairs()); });
  server.Post("/api/submit", [&](const httplib::Request&, httplib::Response& res) { reply(res, studio.submit()); });
  server.Get(R"(/img/(.+))", [&](const httplib::Request& req, httplib::Response& res) {
    reply(res, studio.image(req.matches[1].str()));
    if (res.status == 200) res.set_header("Cache-Control", "public, max-age=3600");
  });
}

}  // namespace tfq::studio
