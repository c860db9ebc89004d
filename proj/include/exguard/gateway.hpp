// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Prompt templates, structured-output extraction and the completion backend
// abstraction shared by every agent. Concrete backends live in
// mock_backend.hpp (offline, deterministic) and remote_backend.hpp (HTTP).

#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "exguard/error.hpp"

namespace exguard::llm {

using json = nlohmann::json;

enum class JsonKind { string, number, array, object };

struct FieldSpec {
  std::string name;
  JsonKind kind = JsonKind::string;
  std::vector<FieldSpec> element_fields;  // required fields of array elements
};

struct Schema {
  std::vector<FieldSpec> fields;
};

struct PromptTemplate {
  std::string name;
  std::string body;
  Schema schema;
};

inline constexpr std::string_view kMarkerPrefix = "[exguard-template: ";

namespace detail {

// Each template starts with a marker line so an offline backend can tell
// which agent is asking. Data sections are fenced so their bound values can
// be recovered exactly.
inline std::vector<PromptTemplate> build_templates() {
  using K = JsonKind;
  std::vector<PromptTemplate> t;
  t.push_back({"cee-genscenario", R"([exguard-template: cee-genscenario]
Below is a kind of exception in java. Please according to the sample
description of scenario of errortype, provide a scenario description of the
exception in java just like the sample description. Please note that the
granularity of the scenario descriptions you generate should be consistent
with the examples.

[Sample Description]
```text
{sample_desc}
```

[Exception]
```text
{ename}
```

Note you should output in the json format like below, please note that the
granularity of the scenario descriptions you generate should be consistent
with the examples:
{{
    "scenario": ...
}}
)",
               {{{"scenario", K::string, {}}}}});
  t.push_back({"cee-genproperty", R"([exguard-template: cee-genproperty]
Below is a kind of exception in java and its scenario description. Please
according to the sample description of scenario and property of errortype,
provide a property description of the exception in java just like the sample
description. You can also adjust the given scenario description to make them
consistent. Please note that the granularity of the property descriptions you
generate should be consistent with the examples.

[Sample Description]
```text
{sample_desc}
```

[Exception]
```text
{ename}
```

[Scenario Description]
```text
{scenario}
```

Note you should output in the json format like below, please note that the
granularity of the property descriptions you generate should be consistent
with the examples:
{{
    "scenario": ...,
    "property": ...
}}
)",
               {{{"scenario", K::string, {}}, {"property", K::string, {}}}}});
  t.push_back({"planner", R"([exguard-template: planner]
You are a software engineer tasked with analyzing a codebase. Your task is
to segment the given codebase into manageable units for further analysis. The
criteria for segmentation are:
- Each unit should have a length within 200 lines.
- The function nesting level should be low.
- The logical flow should be clear and self-contained.
- The segment should be complete and readable.

The code below has already been segmented into one unit. Summarize it at the
function level: what it does, which APIs it calls and which operations may
fail. Keep the summary under 120 words.

[Codebase]
```java
{codebase}
```

Please output the summary in the json format like below:
{{
    "summary": ...
}}
)",
               {{{"summary", K::string, {}}}}});
  t.push_back({"detector-scenario", R"([exguard-template: detector-scenario]
You are a java code auditor. You will be given a doc describe
different exception scenarios and a java code snippet.

Your task is to label each line of the code snippet with the exception
scenario that it belongs to. If a line does not belong to any scenario,
label it with "None". If a line belongs to one of the given scenarios,
label it with all the scenarios it belongs to. Each scenario is named by the
exception type before the colon; use that name as the label. Code lines are
prefixed with their line number.

[Scenario description]
```text
{scenario}
```

[Java code]
```java
{code}
```

Please output the labeling result in the json format like below:
{{
    "code_with_label": [{{"line": 12, "labels": ["None"]}}, ...]
}}
)",
               {{{"code_with_label", K::array, {{"line", K::number, {}}, {"labels", K::array, {}}}}}}});
  t.push_back({"detector-property", R"([exguard-template: detector-property]
You are a java code auditor. You will be given a doc describe
different exception properties and a java code snippet.

Your task is to label each line of the code snippet with the exception
property that it belongs to. If a line does not belong to any property,
label it with "None". If a line belongs to one of the given properties,
label it with all the properties it belongs to. Each property is named by the
exception type before the colon; use that name as the label. Code lines are
prefixed with their line number.

[property description]
```text
{property}
```

[Java code]
```java
{code}
```

Please output the labeling result in the json format like below:
{{
    "code_with_label": [{{"line": 12, "labels": ["None"]}}, ...]
}}
)",
               {{{"code_with_label", K::array, {{"line", K::number, {}}, {"labels", K::array, {}}}}}}});
  t.push_back({"predator", R"([exguard-template: predator]
You are a code analysis assistant. Your task is to process the given
code unit and identify specific exception types that may be thrown.

[Code Unit]
```java
{code_unit}
```

[Code Summary]
```text
{code_summary}
```

Based on the code summary and the potential exception branches provided,
identify the specific exception nodes that may be thrown.

[Potential Exception Branches]
```text
{exception_branches}
```

Please answer in the following JSON format:
{{
    "ExceptionNodes": [
        {{
            "ExceptionType": "ExceptionType1"
        }},
        {{
            "ExceptionType": "ExceptionType2"
        }}
    ]
}}
Ensure that your response strictly follows the specified format.
)",
               {{{"ExceptionNodes", K::array, {{"ExceptionType", K::string, {}}}}}}});
  t.push_back({"ranker", R"([exguard-template: ranker]
You are an exception ranking assistant. Your task is to assign grades
to the identified exceptions based on their likelihood and the suitability
of their handling strategies.

For each exception, please calculate:

- Exception Likelihood Score (from 0 to 1) based on its attributes and
impact.
- Suitability Score (from 0 to 1) of the proposed handling strategy.

[Identified Exceptions and Handling Strategies]
```json
{exception_nodes}
```

Provide your calculations and the final grades in the following JSON format:
{{
    "Exceptions": [
        {{
            "ExceptionType": "ExceptionType1",
            "LikelihoodScore": value,
            "SuitabilityScore": value
        }}
    ]
}}

Please ensure your response adheres to the specified format.
)",
               {{{"Exceptions", K::array,
                  {{"ExceptionType", K::string, {}},
                   {"LikelihoodScore", K::number, {}},
                   {"SuitabilityScore", K::number, {}}}}}}});
  t.push_back({"handler", R"([exguard-template: handler]
You are a software engineer specializing in exception handling. Your
task is to optimize the given code unit by applying appropriate exception
handling strategies.

[Code Unit]
```java
{code_unit}
```

[Handling Strategy]
```json
{strategy1}
```

Generate the optimized code with the applied exception handling strategies.
Wrap exactly the given code unit in one try block, with one catch clause per
strategy in the given order, and keep every code line unchanged.

Please provide the optimized code in the following json format:
{{
    "optimized_code": ...
}}

Ensure that the code is syntactically correct and adheres to best practices
in exception handling.
)",
               {{{"optimized_code", K::string, {}}}}});
  t.push_back({"judge", R"([exguard-template: judge]
You are a senior java code reviewer. Review the exception handling in the
try-catch block below against engineering best practices: catch clauses
must not be empty, must catch the most specific applicable exception types
rather than Exception or Throwable, and must not be unreachable because a
supertype is caught earlier. Give a binary assessment: good or bad.

[Try-Catch Block]
```java
{block}
```

Please output the assessment in the json format like below:
{{
    "verdict": "good",
    "reason": ...
}}
)",
               {{{"verdict", K::string, {}}}}});
  return t;
}

inline bool placeholder_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace detail

inline const std::vector<PromptTemplate>& templates() {
  static const std::vector<PromptTemplate> t = detail::build_templates();
  return t;
}

inline const PromptTemplate& get_template(std::string_view name) {
  for (const PromptTemplate& t : templates()) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::unknown_template, "no prompt template named '" + std::string(name) + "'");
}

/// Placeholder names appearing in a template body, in order.
inline std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    if (i + 1 < body.size() && body[i + 1] == '{') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < body.size() && detail::placeholder_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) out.emplace_back(body.substr(i + 1, j - i - 1));
  }
  return out;
}

/// Single-pass substitution: `{name}` is replaced by its binding, `{{` and
/// `}}` become literal braces, and bound values are never rescanned.
inline std::string render(std::string_view template_name, const std::map<std::string, std::string>& bindings) {
  const std::string& body = get_template(template_name).body;
  std::string out;
  out.reserve(body.size() + 256);
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
      out += '{';
      ++i;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      out += '}';
      ++i;
    } else if (c == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && detail::placeholder_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        const std::string key = body.substr(i + 1, j - i - 1);
        auto it = bindings.find(key);
        if (it == bindings.end()) {
          throw Error(ErrorCode::unbound_placeholder, "placeholder '{" + key + "}' of template '" +
                                                          std::string(template_name) + "' is unbound");
        }
        out += it->second;
        i = j;
      } else {
        out += c;
      }
    } else {
      out += c;
    }
  }
  return out;
}

/// Name from the marker line of a rendered prompt, if present.
inline std::optional<std::string> template_of(std::string_view prompt) {
  const std::size_t at = prompt.find(kMarkerPrefix);
  if (at == std::string_view::npos) return std::nullopt;
  const std::size_t start = at + kMarkerPrefix.size();
  const std::size_t end = prompt.find(']', start);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(prompt.substr(start, end - start));
}

/// Content of the fenced block following a `[header]` line.
inline std::optional<std::string> section(std::string_view prompt, std::string_view header) {
  const std::string tag = "[" + std::string(header) + "]\n";
  const std::size_t at = prompt.find(tag);
  if (at == std::string_view::npos) return std::nullopt;
  std::size_t fence = at + tag.size();
  if (prompt.substr(fence, 3) != "```") return std::nullopt;
  const std::size_t body = prompt.find('\n', fence);
  if (body == std::string_view::npos) return std::nullopt;
  const std::size_t close = prompt.find("\n```\n", body);
  if (close == std::string_view::npos) return std::nullopt;
  if (close <= body) return std::string();
  return std::string(prompt.substr(body + 1, close - body - 1));
}

inline void check_schema(const json& value, const std::vector<FieldSpec>& fields, const std::string& path) {
  if (!value.is_object()) throw Error(ErrorCode::schema_mismatch, "expected an object at '" + path + "'");
  for (const FieldSpec& f : fields) {
    const std::string where = path.empty() ? f.name : path + "." + f.name;
    if (!value.contains(f.name)) throw Error(ErrorCode::schema_mismatch, "missing field '" + where + "'");
    const json& v = value.at(f.name);
    bool ok = false;
    switch (f.kind) {
      case JsonKind::string: ok = v.is_string(); break;
      case JsonKind::number: ok = v.is_number(); break;
      case JsonKind::array: ok = v.is_array(); break;
      case JsonKind::object: ok = v.is_object(); break;
    }
    if (!ok) throw Error(ErrorCode::schema_mismatch, "field '" + where + "' has the wrong type");
    if (f.kind == JsonKind::array && !f.element_fields.empty()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        check_schema(v[i], f.element_fields, where + "[" + std::to_string(i) + "]");
      }
    }
  }
}

/// First balanced top-level JSON object in free text (prose wrappers and
/// code fences are skipped), validated against `schema` when given.
inline json extract_json(std::string_view text, const Schema* schema = nullptr) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') in_string = true;
      if (c == '{') ++depth;
      if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) continue;
    json parsed = json::parse(text.substr(start, end - start + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    if (schema) check_schema(parsed, schema->fields, "");
    return parsed;
  }
  throw Error(ErrorCode::no_json, "no JSON object found in completion");
}

struct BackendConfig {
  std::string endpoint = "http://localhost:8000/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "EXGUARD_API_KEY";
  double timeout_s = 60.0;
  int max_retries = 3;
  double backoff_base_s = 0.5;
  int max_in_flight = 8;
  double temperature = 0.0;

  void validate() const {
    if (max_in_flight < 1) throw Error(ErrorCode::config, "max in-flight requests must be >= 1");
    if (max_retries < 0) throw Error(ErrorCode::config, "retries must be >= 0");
    if (timeout_s <= 0) throw Error(ErrorCode::config, "timeout must be positive");
  }
};

struct Completion {
  std::string raw;
  std::optional<json> payload;  // present iff schema extraction succeeded
  int attempts = 0;
  bool degraded = false;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const std::string& prompt) = 0;
  virtual bool is_mock() const { return false; }
};

/// Runs `attempt` up to 1 + max_retries times with exponential backoff.
/// `attempt` signals a retryable failure by throwing exguard::Error with
/// code backend or timeout.
template <class Attempt>
Completion with_retries(const BackendConfig& config, Attempt&& attempt) {
  const int total = 1 + std::max(0, config.max_retries);
  for (int k = 1;; ++k) {
    try {
      Completion c;
      c.raw = attempt();
      c.attempts = k;
      return c;
    } catch (const Error& e) {
      if ((e.code() != ErrorCode::backend && e.code() != ErrorCode::timeout) || k >= total) throw;
      const double delay = config.backoff_base_s * std::pow(2.0, k - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
}

/// Caps the number of concurrent in-flight calls to the wrapped backend.
class BoundedBackend final : public CompletionBackend {
 public:
  BoundedBackend(std::shared_ptr<CompletionBackend> inner, int max_in_flight)
      : inner_(std::move(inner)), slots_(std::max(1, max_in_flight)) {}

  Completion complete(const std::string& prompt) override {
    slots_.acquire();
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    struct Release {
      BoundedBackend* self;
      ~Release() {
        --self->in_flight_;
        self->slots_.release();
      }
    } release{this};
    return inner_->complete(prompt);
  }

  bool is_mock() const override { return inner_->is_mock(); }
  int peak_in_flight() const { return peak_.load(); }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  std::counting_semaphore<1 << 16> slots_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

/// Renders nothing; sends `prompt` and extracts the payload for the
/// template's schema, asking again (up to `malformed_retries` more times)
/// when the reply carries no valid object.
inline Completion complete_structured(CompletionBackend& backend, std::string_view template_name,
                                      const std::string& prompt, int malformed_retries = 2) {
  const Schema& schema = get_template(template_name).schema;
  int attempts = 0;
  std::string last_error;
  for (int k = 0; k <= malformed_retries; ++k) {
    Completion c = backend.complete(prompt);
    attempts += c.attempts;
    try {
      c.payload = extract_json(c.raw, &schema);
      c.attempts = attempts;
      return c;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::malformed_output, std::string(template_name) + " output unusable after " +
                                               std::to_string(malformed_retries + 1) + " tries: " + last_error);
}

}  // namespace exguard::llm
