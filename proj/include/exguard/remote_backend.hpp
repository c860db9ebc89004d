// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Chat-completion backend over HTTP(S). Link with OpenSSL and define
// CPPHTTPLIB_OPENSSL_SUPPORT for https endpoints.

#pragma once

#include <httplib.h>

#include <cstdlib>
#include <string>
#include <utility>

#include "exguard/gateway.hpp"

namespace exguard::llm {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::config, "endpoint must include a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class RemoteBackend final : public CompletionBackend {
 public:
  explicit RemoteBackend(BackendConfig config) : config_(std::move(config)), endpoint_(split_endpoint(config_.endpoint)) {
    config_.validate();
  }

  Completion complete(const std::string& prompt) override {
    const json request = {{"model", config_.model},
                          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                          {"temperature", config_.temperature}};
    const std::string body = request.dump();
    return with_retries(config_, [&] { return post(body); });
  }

 private:
  std::string post(const std::string& body) const {
    httplib::Client client(endpoint_.origin);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const httplib::Result res = client.Post(endpoint_.path, headers, body, "application/json");
    if (!res) {
      if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
          res.error() == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::timeout, "request to " + endpoint_.origin + " timed out or was cut off");
      }
      throw Error(ErrorCode::backend, "request to " + endpoint_.origin + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::backend, "endpoint answered HTTP " + std::to_string(res->status));
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw Error(ErrorCode::backend, "endpoint reply is not JSON");
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::backend, "endpoint reply has no choices[0].message.content");
    }
  }

  BackendConfig config_;
  Endpoint endpoint_;
};

}  // namespace exguard::llm
