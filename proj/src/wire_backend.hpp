#pragma once

#include "shadowfix/backend.hpp"

namespace shadowfix::backend::detail {

std::shared_ptr<Backend> make_wire_backend(const nlohmann::json& config);

}  // namespace shadowfix::backend::detail
