#include "homog/field_spec.hpp"

#include <cctype>
#include <cmath>

namespace homog {

namespace {

struct ExprParser {
  const std::string& s;
  size_t pos = 0;
  int dim;
  ExprAst ast;

  explicit ExprParser(const std::string& text, int d) : s(text), dim(d) {}

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  int push(ExprNode n) {
    ast.nodes.push_back(n);
    return static_cast<int>(ast.nodes.size()) - 1;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      skip();
      if (eat('+')) {
        int rhs = parse_term();
        lhs = push({ExprNode::Op::Add, 0, 0, lhs, rhs});
      } else if (eat('-')) {
        int rhs = parse_term();
        lhs = push({ExprNode::Op::Sub, 0, 0, lhs, rhs});
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_factor();
    for (;;) {
      skip();
      if (eat('*')) {
        int rhs = parse_factor();
        lhs = push({ExprNode::Op::Mul, 0, 0, lhs, rhs});
      } else {
        return lhs;
      }
    }
  }

  int parse_factor() {
    skip();
    if (eat('-')) {
      int a = parse_factor();
      return push({ExprNode::Op::Neg, 0, 0, a, -1});
    }
    return parse_primary();
  }

  std::string ident() {
    skip();
    std::string out;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) {
      out += s[pos++];
    }
    return out;
  }

  int parse_primary() {
    skip();
    if (pos >= s.size()) throw ConfigError("expr: unexpected end in '" + s + "'");
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t used = 0;
      double val = std::stod(s.substr(pos), &used);
      pos += used;
      return push({ExprNode::Op::Num, val, 0, -1, -1});
    }
    if (c == '(') {
      ++pos;
      int e = parse_expr();
      if (!eat(')')) throw ConfigError("expr: missing ')' in '" + s + "'");
      return e;
    }
    std::string name = ident();
    if (name.empty()) throw ConfigError("expr: bad token in '" + s + "'");
    if (name == "pi") return push({ExprNode::Op::Num, pi, 0, -1, -1});
    if (name.size() == 2 && name[0] == 'x') {
      int v = name[1] - '1';
      if (v < 0 || v >= dim) throw ConfigError("expr: variable " + name + " out of range");
      return push({ExprNode::Op::Var, 0, v, -1, -1});
    }
    ExprNode::Op op;
    if (name == "sin") op = ExprNode::Op::Sin;
    else if (name == "cos") op = ExprNode::Op::Cos;
    else if (name == "exp") op = ExprNode::Op::Exp;
    else throw ConfigError("expr: unknown identifier '" + name + "'");
    if (!eat('(')) throw ConfigError("expr: expected '(' after " + name);
    int a = parse_expr();
    if (!eat(')')) throw ConfigError("expr: missing ')' after " + name);
    return push({op, 0, 0, a, -1});
  }
};

double eval_node(const ExprAst& ast, int i, const double* x) {
  const ExprNode& n = ast.nodes[i];
  switch (n.op) {
    case ExprNode::Op::Num: return n.num;
    case ExprNode::Op::Var: return x[n.var];
    case ExprNode::Op::Add: return eval_node(ast, n.a, x) + eval_node(ast, n.b, x);
    case ExprNode::Op::Sub: return eval_node(ast, n.a, x) - eval_node(ast, n.b, x);
    case ExprNode::Op::Mul: return eval_node(ast, n.a, x) * eval_node(ast, n.b, x);
    case ExprNode::Op::Neg: return -eval_node(ast, n.a, x);
    case ExprNode::Op::Sin: return std::sin(eval_node(ast, n.a, x));
    case ExprNode::Op::Cos: return std::cos(eval_node(ast, n.a, x));
    case ExprNode::Op::Exp: return std::exp(eval_node(ast, n.a, x));
  }
  return 0;
}

double wrap01(double t) { return t - std::floor(t); }

nlohmann::json cplx_to_json(const cplx& z) {
  return nlohmann::json::array({z.real(), z.imag()});
}

cplx cplx_from_json(const nlohmann::json& j) {
  if (j.is_number()) return cplx(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2)
    throw ConfigError("complex value must be a number or [re, im]");
  return cplx(j[0].get<double>(), j[1].get<double>());
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(cplx_to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw ConfigError("matrix value has wrong row count");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      throw ConfigError("matrix value has wrong column count");
    for (int k = 0; k < cols; ++k) m(i, k) = cplx_from_json(j[i][k]);
  }
  return m;
}

}  // namespace

double ExprAst::eval(const double* x) const { return eval_node(*this, root, x); }

ExprAst parse_expr(const std::string& text, int dim) {
  ExprParser p(text, dim);
  int root = p.parse_expr();
  p.skip();
  if (p.pos != text.size()) throw ConfigError("expr: trailing input in '" + text + "'");
  p.ast.root = root;
  return p.ast;
}

Mat FieldSpec::eval(const double* x) const {
  double y[3] = {0, 0, 0};
  for (int i = 0; i < dim; ++i) y[i] = wrap01(x[i]);
  switch (kind) {
    case FieldKind::Constant:
      return value;
    case FieldKind::Fourier: {
      Mat out = Mat::Zero(rows, cols);
      for (const auto& mode : modes) {
        double phase = 0;
        for (int i = 0; i < dim; ++i) phase += mode.k[i] * y[i];
        out += mode.coeff * std::exp(cplx(0, 2.0 * pi * phase));
      }
      return out;
    }
    case FieldKind::Piecewise: {
      double t = y[axis];
      // pieces[i] lives on [breaks[i], breaks[i+1]); t < breaks[0] wraps to the last piece
      size_t i = 0;
      if (t < breaks.front()) {
        i = breaks.size() - 1;
      } else {
        while (i + 1 < breaks.size() && t >= breaks[i + 1]) ++i;
      }
      return pieces[i];
    }
    case FieldKind::Expr: {
      Mat out(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = cplx(asts[i * cols + j].eval(y), 0.0);
      return out;
    }
  }
  return Mat::Zero(rows, cols);
}

FieldSpec constant_spec(const Mat& value, int dim) {
  FieldSpec f;
  f.kind = FieldKind::Constant;
  f.dim = dim;
  f.rows = static_cast<int>(value.rows());
  f.cols = static_cast<int>(value.cols());
  f.value = value;
  return f;
}

FieldSpec expr_spec(const std::vector<std::string>& entries, int rows, int cols, int dim) {
  if (static_cast<int>(entries.size()) != rows * cols)
    throw ConfigError("expr spec: entry count does not match shape");
  FieldSpec f;
  f.kind = FieldKind::Expr;
  f.dim = dim;
  f.rows = rows;
  f.cols = cols;
  f.entries = entries;
  for (const auto& e : entries) f.asts.push_back(parse_expr(e, dim));
  return f;
}

FieldSpec parse_field_spec(const nlohmann::json& j, int dim) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("field spec: missing kind");
  FieldSpec f;
  f.dim = dim;
  f.rows = j.value("rows", 1);
  f.cols = j.value("cols", 1);
  if (f.rows < 1 || f.cols < 1) throw ConfigError("field spec: bad shape");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "constant") {
    f.kind = FieldKind::Constant;
    f.value = mat_from_json(j.at("value"), f.rows, f.cols);
  } else if (kind == "fourier") {
    f.kind = FieldKind::Fourier;
    for (const auto& jm : j.at("modes")) {
      FourierMode mode;
      const auto& jk = jm.at("k");
      if (static_cast<int>(jk.size()) != dim)
        throw ConfigError("fourier mode: k has wrong dimension");
      for (int i = 0; i < dim; ++i) mode.k[i] = jk[i].get<int>();
      mode.coeff = mat_from_json(jm.at("coeff"), f.rows, f.cols);
      f.modes.push_back(std::move(mode));
    }
  } else if (kind == "piecewise") {
    f.kind = FieldKind::Piecewise;
    f.axis = j.value("axis", 0);
    if (f.axis < 0 || f.axis >= dim) throw ConfigError("piecewise: axis out of range");
    f.breaks = j.at("breaks").get<std::vector<double>>();
    if (f.breaks.empty()) throw ConfigError("piecewise: needs at least one break");
    for (size_t i = 0; i < f.breaks.size(); ++i) {
      if (f.breaks[i] < 0 || f.breaks[i] >= 1) throw ConfigError("piecewise: breaks must lie in [0,1)");
      if (i > 0 && f.breaks[i] <= f.breaks[i - 1]) throw ConfigError("piecewise: breaks must increase");
    }
    for (const auto& jv : j.at("values")) f.pieces.push_back(mat_from_json(jv, f.rows, f.cols));
    if (f.pieces.size() != f.breaks.size())
      throw ConfigError("piecewise: values/breaks length mismatch");
  } else if (kind == "expr") {
    f.kind = FieldKind::Expr;
    for (const auto& row : j.at("entries"))
      for (const auto& e : row) f.entries.push_back(e.get<std::string>());
    if (static_cast<int>(f.entries.size()) != f.rows * f.cols)
      throw ConfigError("expr spec: entries do not match shape");
    for (const auto& e : f.entries) f.asts.push_back(parse_expr(e, dim));
  } else {
    throw ConfigError("field spec: unknown kind '" + kind + "'");
  }
  return f;
}

nlohmann::json field_spec_to_json(const FieldSpec& f) {
  nlohmann::json j;
  j["rows"] = f.rows;
  j["cols"] = f.cols;
  switch (f.kind) {
    case FieldKind::Constant:
      j["kind"] = "constant";
      j["value"] = mat_to_json(f.value);
      break;
    case FieldKind::Fourier: {
      j["kind"] = "fourier";
      nlohmann::json modes = nlohmann::json::array();
      for (const auto& mode : f.modes) {
        nlohmann::json jm;
        nlohmann::json jk = nlohmann::json::array();
        for (int i = 0; i < f.dim; ++i) jk.push_back(mode.k[i]);
        jm["k"] = jk;
        jm["coeff"] = mat_to_json(mode.coeff);
        modes.push_back(jm);
      }
      j["modes"] = modes;
      break;
    }
    case FieldKind::Piecewise: {
      j["kind"] = "piecewise";
      j["axis"] = f.axis;
      j["breaks"] = f.breaks;
      nlohmann::json vals = nlohmann::json::array();
      for (const auto& p : f.pieces) vals.push_back(mat_to_json(p));
      j["values"] = vals;
      break;
    }
    case FieldKind::Expr: {
      j["kind"] = "expr";
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < f.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < f.cols; ++k) row.push_back(f.entries[i * f.cols + k]);
        rows.push_back(row);
      }
      j["entries"] = rows;
      break;
    }
  }
  return j;
}

}  // namespace homog
