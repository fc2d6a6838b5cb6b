#pragma once

#include <memory>

#include "privdistill/policy/network.hpp"

namespace privdistill::policy {

std::unique_ptr<Network> make_transformer(const Architecture& arch);
std::unique_ptr<Network> make_window_mlp(const Architecture& arch);

}  // namespace privdistill::policy
