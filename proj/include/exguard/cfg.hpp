// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Statement-level parse of a code unit and the control flow graph built
// over it. The parser works on comment/string-masked text and only knows
// enough Java to find statement and block boundaries.

#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "exguard/error.hpp"
#include "exguard/javasrc.hpp"
#include "exguard/planner.hpp"

namespace exguard::cfg {

enum class StmtKind { simple, throw_, return_, block, if_, while_, for_, do_, switch_, try_, decl };

inline std::string_view to_string(StmtKind k) {
  switch (k) {
    case StmtKind::simple: return "simple";
    case StmtKind::throw_: return "throw";
    case StmtKind::return_: return "return";
    case StmtKind::block: return "block";
    case StmtKind::if_: return "if";
    case StmtKind::while_: return "while";
    case StmtKind::for_: return "for";
    case StmtKind::do_: return "do";
    case StmtKind::switch_: return "switch";
    case StmtKind::try_: return "try";
    case StmtKind::decl: return "decl";
  }
  return "simple";
}

struct Stmt;

/// A statement list: a `{...}` block, or the single statement of an
/// unbraced if/loop body.
struct Body {
  std::vector<Stmt> stmts;
  bool braced = false;
  int open_line = 0;   // line of '{' (braced) or of the statement
  int close_line = 0;  // line of '}' (braced) or of the statement end
  std::size_t open_offset = 0;
  std::size_t close_offset = 0;
};

struct CatchInfo {
  std::vector<std::string> types;
  std::string variable;
  int line = 0;
};

struct Stmt {
  StmtKind kind = StmtKind::simple;
  int first_line = 0;  // absolute
  int last_line = 0;
  int header_last = 0;  // last line of an if/loop/switch header or decl signature
  std::size_t begin = 0;
  std::size_t end = 0;  // offset of the last character
  // if: then[, else]; loops, switch, block, decl: body; do: body;
  // try: try body, one per catch, then finally when present.
  std::vector<Body> bodies;
  std::vector<CatchInfo> catches;
  bool has_else = false;
  bool has_finally = false;
  int tail_line = 0;  // do: line of the trailing `while`
  std::string header;  // decl: masked signature text
  bool class_like = false;
};

namespace detail {

inline bool starts_word(std::string_view m, std::size_t i, std::string_view kw) {
  return javasrc::keyword_at(m, i, kw);
}

inline CatchInfo parse_catch_param(std::string_view param) {
  CatchInfo c;
  std::vector<std::string> alternatives;
  std::size_t start = 0;
  while (start <= param.size()) {
    std::size_t bar = param.find('|', start);
    if (bar == std::string_view::npos) bar = param.size();
    alternatives.emplace_back(param.substr(start, bar - start));
    start = bar + 1;
  }
  for (std::size_t a = 0; a < alternatives.size(); ++a) {
    std::vector<javasrc::Identifier> words = javasrc::identifiers(alternatives[a]);
    words.erase(std::remove_if(words.begin(), words.end(), [](const auto& w) { return w.text == "final"; }),
                words.end());
    if (a + 1 == alternatives.size() && words.size() >= 2) {
      c.variable = words.back().text;
      words.pop_back();
    }
    if (!words.empty()) c.types.push_back(words.back().text);
  }
  return c;
}

class Parser {
 public:
  Parser(std::string masked, int base_line) : m_(std::move(masked)), index_(m_), base_(base_line) {}

  std::vector<Stmt> parse_unit() { return list(true); }

 private:
  int line(std::size_t off) const {
    if (m_.empty()) return base_;
    return index_.line_of(std::min(off, m_.size() - 1)) + base_ - 1;
  }
  void skip() { pos_ = javasrc::skip_space(m_, pos_); }
  bool eof() const { return pos_ >= m_.size(); }

  std::size_t paren_end(std::size_t open) const {
    const std::size_t close = javasrc::match_paren(m_, open);
    if (close == std::string::npos) {
      throw Error(ErrorCode::lexing, "line " + std::to_string(line(open)) + ": unclosed parenthesis");
    }
    return close;
  }

  std::vector<Stmt> list(bool top_level, bool switch_body = false) {
    std::vector<Stmt> out;
    for (;;) {
      skip();
      if (eof()) break;
      if (m_[pos_] == '}') {
        if (!top_level) break;
        ++pos_;  // stray closing brace of an enclosing scope outside the unit
        continue;
      }
      if (switch_body && (starts_word(m_, pos_, "case") || starts_word(m_, pos_, "default"))) {
        skip_label();
        continue;
      }
      const std::size_t before = pos_;
      out.push_back(statement());
      if (pos_ == before) ++pos_;
    }
    return out;
  }

  void skip_label() {
    int depth = 0;
    for (; pos_ < m_.size(); ++pos_) {
      const char c = m_[pos_];
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (depth == 0 && c == ':' && (pos_ + 1 >= m_.size() || m_[pos_ + 1] != ':')) {
        ++pos_;
        return;
      }
      if (depth == 0 && c == '-' && pos_ + 1 < m_.size() && m_[pos_ + 1] == '>') {
        pos_ += 2;
        return;
      }
      if (c == '{' || c == ';' || c == '}') return;
    }
  }

  Body braced_body() {
    Body b;
    b.braced = true;
    b.open_offset = pos_;
    b.open_line = line(pos_);
    ++pos_;
    b.stmts = list(false);
    skip();
    if (!eof() && m_[pos_] == '}') {
      b.close_offset = pos_;
      ++pos_;
    } else {
      b.close_offset = m_.empty() ? 0 : m_.size() - 1;  // closed at end of unit
    }
    b.close_line = line(b.close_offset);
    return b;
  }

  Body sub_statement() {
    skip();
    if (!eof() && m_[pos_] == '{') return braced_body();
    Body b;
    if (eof()) {
      b.open_line = b.close_line = line(m_.size());
      return b;
    }
    b.stmts.push_back(statement());
    b.open_line = b.stmts.back().first_line;
    b.close_line = b.stmts.back().last_line;
    b.open_offset = b.stmts.back().begin;
    b.close_offset = b.stmts.back().end;
    return b;
  }

  // `kw (...)` header; leaves pos_ after ')'. Returns the header end line.
  int paren_header(std::size_t kw_len) {
    pos_ += kw_len;
    skip();
    if (!eof() && m_[pos_] == '(') {
      const std::size_t close = paren_end(pos_);
      pos_ = close + 1;
      return line(close);
    }
    return line(pos_ == 0 ? 0 : pos_ - 1);
  }

  Stmt finish(Stmt s) {
    s.end = pos_ == 0 ? 0 : pos_ - 1;
    s.last_line = line(s.end);
    return s;
  }

  Stmt statement() {
    Stmt s;
    s.begin = pos_;
    s.first_line = line(pos_);
    if (m_[pos_] == '{') {
      s.kind = StmtKind::block;
      s.header_last = s.first_line;
      s.bodies.push_back(braced_body());
      return finish(std::move(s));
    }
    if (m_[pos_] == ';') {
      ++pos_;
      s.header_last = s.first_line;
      return finish(std::move(s));
    }
    if (starts_word(m_, pos_, "if")) {
      s.kind = StmtKind::if_;
      s.header_last = paren_header(2);
      s.bodies.push_back(sub_statement());
      const std::size_t after = pos_;
      skip();
      if (starts_word(m_, pos_, "else")) {
        pos_ += 4;
        s.has_else = true;
        s.bodies.push_back(sub_statement());
      } else {
        pos_ = after;  // keep the statement end on its own last token
      }
      return finish(std::move(s));
    }
    if (starts_word(m_, pos_, "while") || starts_word(m_, pos_, "for")) {
      s.kind = m_[pos_] == 'w' ? StmtKind::while_ : StmtKind::for_;
      s.header_last = paren_header(s.kind == StmtKind::while_ ? 5 : 3);
      s.bodies.push_back(sub_statement());
      return finish(std::move(s));
    }
    if (starts_word(m_, pos_, "do")) {
      s.kind = StmtKind::do_;
      pos_ += 2;
      s.header_last = s.first_line;
      s.bodies.push_back(sub_statement());
      skip();
      s.tail_line = line(pos_);
      if (starts_word(m_, pos_, "while")) {
        paren_header(5);
        skip();
        if (!eof() && m_[pos_] == ';') ++pos_;
      }
      return finish(std::move(s));
    }
    if (starts_word(m_, pos_, "switch") || starts_word(m_, pos_, "synchronized")) {
      const bool is_switch = m_[pos_ + 1] == 'w';
      const std::size_t save = pos_;
      const int header_last = paren_header(is_switch ? 6 : 12);
      skip();
      if (!eof() && m_[pos_] == '{') {
        s.kind = is_switch ? StmtKind::switch_ : StmtKind::block;
        s.header_last = header_last;
        Body b;
        b.braced = true;
        b.open_offset = pos_;
        b.open_line = line(pos_);
        ++pos_;
        b.stmts = list(false, is_switch);
        skip();
        b.close_offset = eof() ? m_.size() - 1 : pos_;
        if (!eof()) ++pos_;
        b.close_line = line(b.close_offset);
        s.bodies.push_back(std::move(b));
        return finish(std::move(s));
      }
      pos_ = save;  // `switch` expression or synchronized modifier
    }
    if (starts_word(m_, pos_, "try")) {
      s.kind = StmtKind::try_;
      pos_ += 3;
      skip();
      if (!eof() && m_[pos_] == '(') pos_ = paren_end(pos_) + 1;
      skip();
      s.header_last = line(pos_);
      if (eof() || m_[pos_] != '{') return scan_simple(std::move(s));
      s.bodies.push_back(braced_body());
      std::size_t after = pos_;
      for (;;) {
        skip();
        if (!starts_word(m_, pos_, "catch")) break;
        const std::size_t at = pos_;
        pos_ += 5;
        skip();
        if (eof() || m_[pos_] != '(') break;
        const std::size_t close = paren_end(pos_);
        CatchInfo c = parse_catch_param(std::string_view(m_).substr(pos_ + 1, close - pos_ - 1));
        c.line = line(at);
        pos_ = close + 1;
        skip();
        if (eof() || m_[pos_] != '{') break;
        s.catches.push_back(std::move(c));
        s.bodies.push_back(braced_body());
        after = pos_;
      }
      pos_ = after;
      skip();
      if (starts_word(m_, pos_, "finally")) {
        pos_ += 7;
        skip();
        if (!eof() && m_[pos_] == '{') {
          s.has_finally = true;
          s.bodies.push_back(braced_body());
          after = pos_;
        }
      }
      pos_ = after;
      return finish(std::move(s));
    }
    if (starts_word(m_, pos_, "throw")) s.kind = StmtKind::throw_;
    if (starts_word(m_, pos_, "return")) s.kind = StmtKind::return_;
    return scan_simple(std::move(s));
  }

  bool expression_brace(std::size_t begin, std::size_t brace) const {
    std::size_t p = brace;
    while (p > begin && std::isspace(static_cast<unsigned char>(m_[p - 1]))) --p;
    if (p == begin) return false;
    const char prev = m_[p - 1];
    if (prev == '=' || prev == ',' || prev == '[' || prev == ']' || prev == '(' || prev == '?' || prev == ':') {
      return true;
    }
    if (prev == '>' && p >= begin + 2 && m_[p - 2] == '-') return true;
    int depth = 0;
    for (std::size_t i = begin; i < brace; ++i) {
      const char c = m_[i];
      if (c == '(' || c == '[') ++depth;
      if (c == ')' || c == ']') --depth;
      if (depth == 0 && c == '=' && (i + 1 >= brace || m_[i + 1] != '=') && (i == begin || std::string_view("=!<>").find(m_[i - 1]) == std::string_view::npos)) {
        return true;
      }
      if (depth == 0 && starts_word(m_, i, "new")) return true;
    }
    return false;
  }

  Stmt scan_simple(Stmt s) {
    const bool expression_only = s.kind == StmtKind::throw_ || s.kind == StmtKind::return_;
    int depth = 0;
    while (pos_ < m_.size()) {
      const char c = m_[pos_];
      if (c == '(' || c == '[') ++depth;
      if ((c == ')' || c == ']') && depth > 0) --depth;
      if (depth == 0 && c == ';') {
        ++pos_;
        break;
      }
      if (depth == 0 && c == '}') break;
      if (c == '{') {
        if (depth > 0 || expression_only || expression_brace(s.begin, pos_)) {
          const std::size_t close = javasrc::match_brace(m_, pos_);
          pos_ = close == std::string::npos ? m_.size() : close + 1;
          continue;
        }
        s.kind = StmtKind::decl;
        s.header = m_.substr(s.begin, pos_ - s.begin);
        s.header_last = line(pos_);
        for (const javasrc::Identifier& id : javasrc::identifiers(s.header)) {
          if (id.text == "class" || id.text == "interface" || id.text == "enum" || id.text == "record") {
            s.class_like = true;
          }
        }
        s.bodies.push_back(braced_body());
        return finish(std::move(s));
      }
      ++pos_;
    }
    if (depth > 0) {
      throw Error(ErrorCode::lexing, "line " + std::to_string(s.first_line) + ": unclosed parenthesis");
    }
    s.header_last = s.first_line;
    Stmt out = finish(std::move(s));
    // A statement cut short by a closing brace ends at its last non-space.
    while (out.end > out.begin && std::isspace(static_cast<unsigned char>(m_[out.end]))) --out.end;
    out.last_line = line(out.end);
    return out;
  }

  std::string m_;
  javasrc::LineIndex index_;
  int base_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses masked unit text whose first line is `base_line`.
inline std::vector<Stmt> parse_statements(std::string_view text, int base_line = 1) {
  detail::Parser p(javasrc::mask(text), base_line);
  return p.parse_unit();
}

enum class EdgeKind { sequence, branch_true, branch_false, loop_back, throw_exit, return_exit, catch_ };

inline std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::sequence: return "sequence";
    case EdgeKind::branch_true: return "branch-true";
    case EdgeKind::branch_false: return "branch-false";
    case EdgeKind::loop_back: return "loop-back";
    case EdgeKind::throw_exit: return "throw-exit";
    case EdgeKind::return_exit: return "return-exit";
    case EdgeKind::catch_: return "catch";
  }
  return "sequence";
}

struct BasicBlock {
  int id = 0;
  int first_line = 0;  // 0 when the block owns no line of its own
  int last_line = 0;
};

struct Edge {
  int from = 0;
  int to = 0;  // Cfg::kExit for the virtual exit
  EdgeKind kind = EdgeKind::sequence;
  auto operator<=>(const Edge&) const = default;
};

struct Cfg {
  static constexpr int kExit = -1;
  int first_line = 1;
  int last_line = 0;
  std::vector<BasicBlock> blocks;
  std::vector<Edge> edges;
  std::vector<int> entries;
  std::vector<int> line_owner;  // block id per unit line
  std::vector<Stmt> program;

  int block_of(int line) const { return line_owner.at(static_cast<std::size_t>(line - first_line)); }
  bool has_edge(int from, int to, EdgeKind kind) const {
    return std::find(edges.begin(), edges.end(), Edge{from, to, kind}) != edges.end();
  }
};

namespace detail {

class Builder {
 public:
  explicit Builder(Cfg& g) : g_(g) {}

  void build(const std::vector<Stmt>& program) {
    int open = -1;
    std::vector<Pending> out = seq(program, {}, open);
    if (open != -1) out.push_back({open, EdgeKind::sequence});
    for (const Pending& p : out) edge(p.from, Cfg::kExit, p.kind);
    if (g_.blocks.empty()) {
      const int b = new_block();
      g_.entries.push_back(b);
      edge(b, Cfg::kExit, EdgeKind::sequence);
    }
    if (g_.entries.empty()) g_.entries.push_back(0);
    assign_lines();
    std::sort(g_.edges.begin(), g_.edges.end());
    g_.edges.erase(std::unique(g_.edges.begin(), g_.edges.end()), g_.edges.end());
  }

 private:
  struct Pending {
    int from;
    EdgeKind kind;
  };

  int new_block() {
    const int id = static_cast<int>(g_.blocks.size());
    g_.blocks.push_back({id, 0, 0});
    claims_.emplace_back();
    return id;
  }
  void claim(int block, int first, int last) {
    if (first > 0 && last >= first) claims_[block].push_back({first, last});
  }
  void edge(int from, int to, EdgeKind kind) { g_.edges.push_back({from, to, kind}); }
  void link(const std::vector<Pending>& pending, int to) {
    for (const Pending& p : pending) edge(p.from, to, p.kind);
  }
  // Ends the open block so the next statement starts a new one.
  void close(std::vector<Pending>& pending, int& open) {
    if (open != -1) pending = {{open, EdgeKind::sequence}};
    open = -1;
  }
  void ensure_open(std::vector<Pending>& pending, int& open) {
    if (open != -1) return;
    open = new_block();
    link(pending, open);
    pending.clear();
  }

  std::vector<Pending> body(const Body& b, std::vector<Pending> pending) {
    int open = -1;
    pending = seq(b.stmts, std::move(pending), open);
    if (open != -1) pending = {{open, EdgeKind::sequence}};
    return pending;
  }

  std::vector<Pending> seq(const std::vector<Stmt>& stmts, std::vector<Pending> pending, int& open) {
    for (const Stmt& s : stmts) {
      switch (s.kind) {
        case StmtKind::simple:
          ensure_open(pending, open);
          claim(open, s.first_line, s.last_line);
          break;
        case StmtKind::throw_:
        case StmtKind::return_:
          ensure_open(pending, open);
          claim(open, s.first_line, s.last_line);
          if (s.kind == StmtKind::return_) {
            edge(open, Cfg::kExit, EdgeKind::return_exit);
          } else if (try_depth_ == 0) {
            edge(open, Cfg::kExit, EdgeKind::throw_exit);
          }
          open = -1;
          pending.clear();
          break;
        case StmtKind::if_: {
          ensure_open(pending, open);
          claim(open, s.first_line, s.header_last);
          const int cond = open;
          open = -1;
          std::vector<Pending> out = body(s.bodies[0], {{cond, EdgeKind::branch_true}});
          if (s.has_else) {
            std::vector<Pending> other = body(s.bodies[1], {{cond, EdgeKind::branch_false}});
            out.insert(out.end(), other.begin(), other.end());
          } else {
            out.push_back({cond, EdgeKind::branch_false});
          }
          pending = std::move(out);
          break;
        }
        case StmtKind::while_:
        case StmtKind::for_: {
          close(pending, open);
          const int head = new_block();
          link(pending, head);
          claim(head, s.first_line, s.header_last);
          for (const Pending& p : body(s.bodies[0], {{head, EdgeKind::branch_true}})) {
            edge(p.from, head, EdgeKind::loop_back);
          }
          pending = {{head, EdgeKind::branch_false}};
          break;
        }
        case StmtKind::do_: {
          close(pending, open);
          const int mark = static_cast<int>(g_.blocks.size());
          std::vector<Pending> out = body(s.bodies[0], pending);
          const int cond = new_block();
          claim(cond, s.tail_line, s.last_line);
          if (mark == cond) link(pending, cond);
          link(out, cond);
          edge(cond, mark, EdgeKind::loop_back);
          pending = {{cond, EdgeKind::branch_false}};
          break;
        }
        case StmtKind::switch_: {
          ensure_open(pending, open);
          claim(open, s.first_line, s.header_last);
          const int head = open;
          open = -1;
          pending = body(s.bodies[0], {{head, EdgeKind::branch_true}});
          pending.push_back({head, EdgeKind::branch_false});
          break;
        }
        case StmtKind::block:
          close(pending, open);
          pending = body(s.bodies[0], std::move(pending));
          break;
        case StmtKind::try_: {
          close(pending, open);
          const int mark = static_cast<int>(g_.blocks.size());
          ++try_depth_;
          std::vector<Pending> out = body(s.bodies[0], pending);
          --try_depth_;
          const int try_end = static_cast<int>(g_.blocks.size());
          for (std::size_t c = 0; c < s.catches.size(); ++c) {
            const int entry = new_block();
            claim(entry, s.catches[c].line, s.catches[c].line);
            for (int b = mark; b < try_end; ++b) edge(b, entry, EdgeKind::catch_);
            int catch_open = entry;
            std::vector<Pending> handled = seq(s.bodies[1 + c].stmts, {}, catch_open);
            if (catch_open != -1) handled.push_back({catch_open, EdgeKind::sequence});
            out.insert(out.end(), handled.begin(), handled.end());
          }
          if (s.has_finally) out = body(s.bodies.back(), std::move(out));
          pending = std::move(out);
          break;
        }
        case StmtKind::decl: {
          close(pending, open);
          const int entry = new_block();
          claim(entry, s.first_line, s.header_last);
          g_.entries.push_back(entry);
          int decl_open = entry;
          std::vector<Pending> out = seq(s.bodies[0].stmts, {}, decl_open);
          if (decl_open != -1) out.push_back({decl_open, EdgeKind::sequence});
          for (const Pending& p : out) edge(p.from, Cfg::kExit, p.kind);
          break;
        }
      }
    }
    return pending;
  }

  // Each unit line goes to the first block claiming it; unclaimed lines
  // (braces, blank lines, labels) join the next owned line's block, or the
  // previous one at the end of the unit.
  void assign_lines() {
    const int n = g_.last_line - g_.first_line + 1;
    g_.line_owner.assign(static_cast<std::size_t>(std::max(0, n)), -1);
    for (std::size_t b = 0; b < claims_.size(); ++b) {
      for (const auto& [first, last] : claims_[b]) {
        for (int l = std::max(first, g_.first_line); l <= std::min(last, g_.last_line); ++l) {
          int& owner = g_.line_owner[static_cast<std::size_t>(l - g_.first_line)];
          if (owner == -1) owner = static_cast<int>(b);
        }
      }
    }
    int next = -1;
    for (int i = n - 1; i >= 0; --i) {
      if (g_.line_owner[i] == -1) {
        g_.line_owner[i] = next;
      } else {
        next = g_.line_owner[i];
      }
    }
    int prev = 0;
    for (int i = 0; i < n; ++i) {
      if (g_.line_owner[i] == -1) {
        g_.line_owner[i] = prev;
      } else {
        prev = g_.line_owner[i];
      }
    }
    for (int i = 0; i < n; ++i) {
      BasicBlock& b = g_.blocks[static_cast<std::size_t>(g_.line_owner[i])];
      const int l = g_.first_line + i;
      if (b.first_line == 0) b.first_line = l;
      b.last_line = l;
    }
  }

  Cfg& g_;
  std::vector<std::vector<std::pair<int, int>>> claims_;
  int try_depth_ = 0;
};

}  // namespace detail

inline Cfg build_cfg(std::string_view text, int first_line = 1) {
  Cfg g;
  g.first_line = first_line;
  g.last_line = first_line + static_cast<int>(javasrc::split_lines(text).size()) - 1;
  g.program = parse_statements(text, first_line);
  detail::Builder(g).build(g.program);
  return g;
}

inline Cfg build_cfg(const planner::CodeUnit& unit) { return build_cfg(unit.text(), unit.start); }

/// Calls `fn(stmt, depth)` for every statement, preorder.
template <class Fn>
void walk(const std::vector<Stmt>& stmts, Fn&& fn, int depth = 0) {
  for (const Stmt& s : stmts) {
    fn(s, depth);
    for (const Body& b : s.bodies) walk(b.stmts, fn, depth + 1);
  }
}

}  // namespace exguard::cfg
