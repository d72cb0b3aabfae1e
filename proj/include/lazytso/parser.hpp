#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lazytso/program.hpp"

namespace lazytso {

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
};

namespace detail {

struct Token {
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int value = 0;
  int line = 1;
  int col = 1;
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  size_t pos = 0;
  int line = 1, col = 1;
  auto take = [&] {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  };
  while (pos < src.size()) {
    char c = src[pos];
    if (c == '#') {
      while (pos < src.size() && src[pos] != '\n') take();
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      take();
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        take();
      t.kind = Token::Kind::Ident;
      t.text = std::string(src.substr(start, pos - start));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos;
      while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) take();
      t.kind = Token::Kind::Number;
      t.text = std::string(src.substr(start, pos - start));
      t.value = std::stoi(t.text);
    } else {
      t.kind = Token::Kind::Punct;
      static const std::string_view two[] = {"->", "<-", ":=", "==", "!=", "&&", "||"};
      bool matched = false;
      for (auto p : two) {
        if (src.substr(pos, 2) == p) {
          t.text = std::string(p);
          take();
          take();
          matched = true;
          break;
        }
      }
      if (!matched) {
        t.text = std::string(1, c);
        take();
      }
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Token::Kind::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  Program run() {
    bool domain_seen = false;
    while (!at_end()) {
      if (is_ident("domain")) {
        if (domain_seen) error(peek(), "duplicate domain declaration");
        next();
        Token n = expect_number();
        if (n.value < 1) error(n, "domain size must be at least 1");
        prog_.domain.size = n.value;
        domain_seen = true;
        expect_punct(";");
      } else if (is_ident("addresses")) {
        next();
        while (peek().kind == Token::Kind::Ident) declare_address(next());
        expect_punct(";");
      } else if (is_ident("thread")) {
        parse_thread();
      } else if (is_ident("goal")) {
        parse_goal();
      } else {
        error(peek(), "expected 'domain', 'addresses', 'thread', or 'goal'");
      }
    }
    if (prog_.threads.empty()) error(peek(), "program has no threads");
    if (prog_.goal.pc.empty()) prog_.goal.pc.resize(prog_.threads.size());
    prog_.assign_instruction_ids();
    for (const auto& d : validate(prog_)) error(peek(), d.message);
    return prog_;
  }

private:
  const Token& peek() const { return toks_[idx_]; }
  const Token& peek(size_t ahead) const {
    return toks_[std::min(idx_ + ahead, toks_.size() - 1)];
  }
  Token next() { return toks_[at_end() ? idx_ : idx_++]; }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  bool is_ident(std::string_view kw) const {
    return peek().kind == Token::Kind::Ident && peek().text == kw;
  }
  bool is_punct(std::string_view p) const {
    return peek().kind == Token::Kind::Punct && peek().text == p;
  }

  [[noreturn]] void error(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  Token expect_ident() {
    if (peek().kind != Token::Kind::Ident) error(peek(), "expected identifier");
    return next();
  }
  Token expect_number() {
    if (peek().kind != Token::Kind::Number) error(peek(), "expected number");
    return next();
  }
  void expect_punct(std::string_view p) {
    if (!is_punct(p)) error(peek(), "expected '" + std::string(p) + "'");
    next();
  }
  bool accept_punct(std::string_view p) {
    if (is_punct(p)) {
      next();
      return true;
    }
    return false;
  }

  int declare_address(const Token& name) {
    auto it = addresses_.find(name.text);
    if (it != addresses_.end()) return it->second;
    if (register_names_.count(name.text))
      error(name, "'" + name.text + "' already names a register");
    int v = static_cast<int>(prog_.addr_names.size());
    if (v >= prog_.domain.size) error(name, "more addresses than domain values");
    prog_.addr_names.push_back(name.text);
    addresses_.emplace(name.text, v);
    return v;
  }

  int register_of(const Token& name, int thread) {
    auto it = thread_regs_[thread].find(name.text);
    if (it == thread_regs_[thread].end()) error(name, "unknown register '" + name.text + "'");
    return it->second;
  }

  int state_id(const Token& name) {
    auto& states = thread_states_.back();
    auto it = states.find(name.text);
    if (it != states.end()) return it->second;
    if (global_states_.count(name.text))
      error(name, "control state '" + name.text + "' already used by another thread");
    int id = prog_.add_state(cur_thread_, name.text);
    states.emplace(name.text, id);
    global_states_.insert(name.text);
    return id;
  }

  // Registers are the identifiers appearing as load/assign targets anywhere in
  // the thread body, so guards may mention them before the defining command.
  void prescan_registers() {
    size_t i = idx_;
    int depth = 0;
    while (i < toks_.size() && toks_[i].kind != Token::Kind::End) {
      const Token& t = toks_[i];
      if (t.kind == Token::Kind::Punct && t.text == "{") ++depth;
      if (t.kind == Token::Kind::Punct && t.text == "}") {
        if (--depth == 0) break;
      }
      bool target = false;
      if (t.kind == Token::Kind::Ident && t.text == "load" &&
          toks_[i + 1].kind == Token::Kind::Ident) {
        declare_thread_register(toks_[i + 1]);
        target = true;
      }
      if (!target && t.kind == Token::Kind::Ident && toks_[i + 1].kind == Token::Kind::Punct &&
          toks_[i + 1].text == ":=")
        declare_thread_register(t);
      ++i;
    }
  }

  void declare_thread_register(const Token& name) {
    if (addresses_.count(name.text))
      error(name, "'" + name.text + "' is an address, not a register");
    auto& regs = thread_regs_[cur_thread_];
    if (regs.count(name.text)) return;
    int id = prog_.add_register(cur_thread_, name.text);
    regs.emplace(name.text, id);
    register_names_.insert(name.text);
  }

  void parse_thread() {
    next();  // thread
    Token name = expect_ident();
    for (const auto& th : prog_.threads)
      if (th.name == name.text) error(name, "duplicate thread name '" + name.text + "'");
    cur_thread_ = static_cast<int>(prog_.threads.size());
    prog_.threads.push_back({name.text, {}, -1, {}, {}});
    thread_states_.emplace_back();
    thread_regs_.emplace_back();

    prescan_registers();
    expect_punct("{");
    if (!is_ident("init")) error(peek(), "thread body must start with 'init'");
    next();
    prog_.threads[cur_thread_].initial = state_id(expect_ident());
    accept_punct(";");

    while (!is_punct("}")) {
      parse_instruction();
      if (!accept_punct(";") && !is_punct("}")) error(peek(), "expected ';' or '}'");
    }
    next();  // }
  }

  void parse_instruction() {
    int s = state_id(expect_ident());
    expect_punct("->");
    int d = state_id(expect_ident());
    expect_punct(":");
    Command cmd = parse_command();
    prog_.threads[cur_thread_].instrs.push_back({"", s, d, cmd, ""});
  }

  Command parse_command() {
    if (is_ident("load")) {
      next();
      int r = register_of(expect_ident(), cur_thread_);
      expect_punct("<-");
      return Command::load(r, parse_addr());
    }
    if (is_ident("store")) {
      next();
      ExprPtr a = parse_addr();
      expect_punct("<-");
      return Command::store(a, parse_expr());
    }
    if (is_ident("mfence")) {
      next();
      return Command::mfence();
    }
    if (is_ident("assume")) {
      next();
      return Command::assume(parse_expr());
    }
    Token name = expect_ident();
    expect_punct(":=");
    return Command::assign(register_of(name, cur_thread_), parse_expr());
  }

  ExprPtr parse_addr() {
    if (accept_punct("[")) {
      ExprPtr e = parse_expr();
      expect_punct("]");
      return e;
    }
    Token name = expect_ident();
    if (!addresses_.count(name.text) && !thread_regs_[cur_thread_].count(name.text))
      return Expr::constant(declare_address(name));
    return primary_from_ident(name);
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (is_punct("||")) {
      next();
      e = Expr::bin(BinOp::Or, e, parse_and());
    }
    return e;
  }
  ExprPtr parse_and() {
    ExprPtr e = parse_cmp();
    while (is_punct("&&")) {
      next();
      e = Expr::bin(BinOp::And, e, parse_cmp());
    }
    return e;
  }
  ExprPtr parse_cmp() {
    ExprPtr e = parse_sum();
    for (;;) {
      BinOp op;
      if (is_punct("==")) op = BinOp::Eq;
      else if (is_punct("!=")) op = BinOp::Ne;
      else if (is_punct("<")) op = BinOp::Lt;
      else break;
      next();
      e = Expr::bin(op, e, parse_sum());
    }
    return e;
  }
  ExprPtr parse_sum() {
    ExprPtr e = parse_prod();
    for (;;) {
      BinOp op;
      if (is_punct("+")) op = BinOp::Add;
      else if (is_punct("-")) op = BinOp::Sub;
      else break;
      next();
      e = Expr::bin(op, e, parse_prod());
    }
    return e;
  }
  ExprPtr parse_prod() {
    ExprPtr e = parse_unary();
    while (is_punct("*")) {
      next();
      e = Expr::bin(BinOp::Mul, e, parse_unary());
    }
    return e;
  }
  ExprPtr parse_unary() {
    if (accept_punct("!")) return Expr::negation(parse_unary());
    return parse_primary();
  }
  ExprPtr parse_primary() {
    if (peek().kind == Token::Kind::Number) {
      Token n = next();
      if (n.value >= prog_.domain.size) error(n, "constant outside domain");
      return Expr::constant(n.value);
    }
    if (accept_punct("(")) {
      ExprPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (peek().kind == Token::Kind::Ident) return primary_from_ident(next());
    error(peek(), "expected expression");
  }

  // Identifier in expression position: address constant, own register, or a
  // qualified `r@thread` reference (rejected unless it names the own thread).
  ExprPtr primary_from_ident(const Token& name) {
    if (is_punct("@")) {
      next();
      Token th = expect_ident();
      if (th.text != prog_.threads[cur_thread_].name)
        error(name, "register " + name.text + "@" + th.text + " belongs to another thread");
      return Expr::reg(register_of(name, cur_thread_));
    }
    auto ait = addresses_.find(name.text);
    if (ait != addresses_.end()) return Expr::constant(ait->second);
    auto rit = thread_regs_[cur_thread_].find(name.text);
    if (rit != thread_regs_[cur_thread_].end()) return Expr::reg(rit->second);
    error(name, "unknown identifier '" + name.text + "'");
  }

  void parse_goal() {
    Token kw = next();
    if (goal_seen_) error(kw, "duplicate goal block");
    goal_seen_ = true;
    expect_punct("{");
    prog_.goal.pc.assign(prog_.threads.size(), std::nullopt);

    if (peek().kind == Token::Kind::Ident && !is_ident("where")) {
      for (;;) {
        Token th = expect_ident();
        int t = -1;
        for (int k = 0; k < prog_.n_threads(); ++k)
          if (prog_.threads[k].name == th.text) t = k;
        if (t < 0) error(th, "unknown thread '" + th.text + "'");
        expect_punct("@");
        std::vector<int> states;
        if (accept_punct("{")) {
          for (;;) {
            states.push_back(goal_state(t));
            if (!accept_punct(",")) break;
          }
          expect_punct("}");
        } else {
          states.push_back(goal_state(t));
        }
        prog_.goal.pc[t] = std::move(states);
        if (!accept_punct(",")) break;
      }
      accept_punct(";");
    }
    if (is_ident("where")) {
      next();
      for (;;) {
        Token name = expect_ident();
        int loc = goal_location(name);
        expect_punct("==");
        Token v = expect_number();
        if (v.value >= prog_.domain.size) error(v, "constant outside domain");
        prog_.goal.val.push_back({loc, static_cast<Value>(v.value)});
        if (!accept_punct(",")) break;
      }
      accept_punct(";");
    }
    expect_punct("}");
  }

  int goal_state(int thread) {
    Token st = expect_ident();
    for (size_t i = 0; i < thread_states_.size(); ++i) {
      auto it = thread_states_[i].find(st.text);
      if (it != thread_states_[i].end()) {
        if (static_cast<int>(i) != thread)
          error(st, "state '" + st.text + "' belongs to another thread");
        return it->second;
      }
    }
    error(st, "unknown control state '" + st.text + "'");
  }

  int goal_location(const Token& name) {
    auto ait = addresses_.find(name.text);
    if (ait != addresses_.end()) return ait->second;
    int found = -1;
    for (const auto& regs : thread_regs_) {
      auto it = regs.find(name.text);
      if (it != regs.end()) {
        if (found >= 0) error(name, "register name '" + name.text + "' is ambiguous in goal");
        found = it->second;
      }
    }
    if (found < 0) error(name, "unknown location '" + name.text + "'");
    return prog_.domain.size + found;
  }

  std::vector<Token> toks_;
  size_t idx_ = 0;
  Program prog_;
  int cur_thread_ = -1;
  bool goal_seen_ = false;
  std::unordered_map<std::string, int> addresses_;
  std::unordered_set<std::string> global_states_;
  std::unordered_set<std::string> register_names_;
  std::vector<std::unordered_map<std::string, int>> thread_states_;
  std::vector<std::unordered_map<std::string, int>> thread_regs_;
};

}  // namespace detail

inline Program parse(std::string_view source) { return detail::Parser(source).run(); }

}  // namespace lazytso
