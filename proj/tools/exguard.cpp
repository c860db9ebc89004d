// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "exguard/commands.hpp"

int main(int argc, char** argv) { return exguard::cli::run(argc, argv); }
