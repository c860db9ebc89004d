// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "exguard/cee.hpp"

namespace exguard::testing {

inline std::string data_path(const std::string& rel) { return std::string(EXGUARD_DATA_DIR) + "/" + rel; }

inline const cee::CeeTree& bundled_tree() {
  static const cee::CeeTree tree = cee::load_cee(data_path("cee.json"));
  return tree;
}

}  // namespace exguard::testing
