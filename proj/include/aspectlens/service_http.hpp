#pragma once

#include <filesystem>

#include <httplib.h>

#include "aspectlens/service.hpp"

namespace aspectlens::service {

// Routes every GET/POST on `server` through `svc`. `svc` must outlive the
// server.
void install_routes(httplib::Server& server, const Service& svc,
                    const std::filesystem::path& static_dir = {});

}  // namespace aspectlens::service
