// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Random brace-balanced Java-like sources for property tests.

#pragma once

#include <random>
#include <string>
#include <vector>

namespace exguard::testing {

class JavaGen {
 public:
  explicit JavaGen(unsigned seed) : rng_(seed) {}

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string file(int methods) {
    lines_.clear();
    emit(0, "import java.io.*;");
    emit(0, "");
    emit(0, "public class Gen" + std::to_string(pick(0, 99)) + " {");
    for (int m = 0; m < methods; ++m) {
      method(1);
      if (pick(0, 2) == 0) emit(1, "");
    }
    emit(0, "}");
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

  /// One method of roughly `body` statements.
  std::string method_text(int body) {
    lines_.clear();
    emit(0, "void m() {");
    for (int i = 0; i < body; ++i) statement(1, 2);
    emit(0, "}");
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

 private:
  void emit(int indent, const std::string& s) { lines_.push_back(std::string(indent * 4, ' ') + s); }

  std::string simple() {
    static const std::vector<std::string> forms = {
        "int x{n} = {n};",
        "String s{n} = \"{{}\" + x;",
        "FileReader r{n} = new FileReader(name);",
        "int p{n} = Integer.parseInt(text);",
        "list.add(\"a}\");",
        "log(\"x\"); // trailing { comment",
        "Thread.sleep({n});",
        "total += compute({n}, 'c');",
        "/* block { */ call{n}();",
        "Runnable r = () -> { run(); };",
    };
    std::string s = forms[pick(0, static_cast<int>(forms.size()) - 1)];
    for (std::size_t at; (at = s.find("{n}")) != std::string::npos;) s.replace(at, 3, std::to_string(pick(0, 9)));
    return s;
  }

  void statement(int indent, int budget) {
    const int kind = budget <= 0 ? 0 : pick(0, 7);
    switch (kind) {
      case 1:
        emit(indent, "if (x > " + std::to_string(pick(0, 9)) + ") {");
        block(indent + 1, budget - 1);
        if (pick(0, 1)) {
          emit(indent, "} else {");
          block(indent + 1, budget - 1);
        }
        emit(indent, "}");
        break;
      case 2:
        emit(indent, "for (int i = 0; i < n; i++) {");
        block(indent + 1, budget - 1);
        emit(indent, "}");
        break;
      case 3:
        emit(indent, "while (ready()) {");
        block(indent + 1, budget - 1);
        emit(indent, "}");
        break;
      case 4:
        emit(indent, "try {");
        block(indent + 1, budget - 1);
        emit(indent, "} catch (IOException e) {");
        emit(indent + 1, "log(e);");
        emit(indent, "}");
        break;
      case 5:
        emit(indent, "call(a,");
        emit(indent + 2, "b);");
        break;
      case 6:
        emit(indent, "return;");
        break;
      default:
        emit(indent, simple());
    }
  }

  void block(int indent, int budget) {
    const int n = pick(1, 3);
    for (int i = 0; i < n; ++i) statement(indent, budget);
  }

  void method(int indent) {
    if (pick(0, 3) == 0) emit(indent, "// helper");
    emit(indent, "public void m" + std::to_string(pick(0, 999)) + "(String name) throws IOException {");
    const int n = pick(1, 8);
    for (int i = 0; i < n; ++i) statement(indent + 1, 2);
    emit(indent, "}");
  }

  std::mt19937 rng_;
  std::vector<std::string> lines_;
};

}  // namespace exguard::testing
