// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "exguard/gateway.hpp"
#include "exguard/javasrc.hpp"

namespace exguard::cee {

struct Enrichment {
  std::string scenario;
  std::string property;
};

/// Two-step prompt chain: a scenario from the sample description, then a
/// property (and possibly adjusted scenario) from that scenario.
inline Enrichment enrich_node(const std::string& name, const std::string& sample_description,
                              llm::CompletionBackend& backend, int malformed_retries = 2) {
  if (javasrc::trim(sample_description).empty()) {
    throw Error(ErrorCode::precondition, "sample description for '" + name + "' is empty");
  }
  const llm::Completion first = llm::complete_structured(
      backend, "cee-genscenario",
      llm::render("cee-genscenario", {{"sample_desc", sample_description}, {"ename", name}}), malformed_retries);
  const std::string scenario = first.payload->at("scenario").get<std::string>();
  const llm::Completion second = llm::complete_structured(
      backend, "cee-genproperty",
      llm::render("cee-genproperty", {{"sample_desc", sample_description}, {"ename", name}, {"scenario", scenario}}),
      malformed_retries);
  return {second.payload->at("scenario").get<std::string>(), second.payload->at("property").get<std::string>()};
}

}  // namespace exguard::cee
