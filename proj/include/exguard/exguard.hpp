// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Umbrella header. Include exguard/remote_backend.hpp separately for the
// HTTP backend (needs OpenSSL for https endpoints).

#pragma once

#include "exguard/cee.hpp"
#include "exguard/cee_enrich.hpp"
#include "exguard/cfg.hpp"
#include "exguard/deep_rag.hpp"
#include "exguard/detector.hpp"
#include "exguard/error.hpp"
#include "exguard/gateway.hpp"
#include "exguard/handler.hpp"
#include "exguard/javasrc.hpp"
#include "exguard/metrics.hpp"
#include "exguard/mock_backend.hpp"
#include "exguard/pipeline.hpp"
#include "exguard/planner.hpp"
#include "exguard/ranker.hpp"
#include "exguard/work_pool.hpp"
