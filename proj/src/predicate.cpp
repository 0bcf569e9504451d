#include "simpforge/predicate.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace simpforge {

const char* rel_token(Rel r) {
  switch (r) {
    case Rel::Eq: return "=";
    case Rel::Ne: return "!=";
    case Rel::Lt: return "<";
    case Rel::Le: return "<=";
  }
  return "?";
}

Atom make_atom(std::string lhs, Rel rel, std::string rhs_var) {
  Atom a;
  a.lhs = std::move(lhs);
  a.rel = rel;
  a.rhs_is_const = false;
  a.rhs_var = std::move(rhs_var);
  return a;
}

Atom make_atom(std::string lhs, Rel rel, std::int64_t rhs_const) {
  Atom a;
  a.lhs = std::move(lhs);
  a.rel = rel;
  a.rhs_is_const = true;
  a.rhs_const = rhs_const;
  return a;
}

Predicate make_predicate(std::vector<Atom> atoms) {
  Predicate p;
  p.atoms = std::move(atoms);
  return canonical(std::move(p));
}

Predicate canonical(Predicate p) {
  for (Atom& a : p.atoms) {
    bool symmetric = a.rel == Rel::Eq || a.rel == Rel::Ne;
    if (symmetric && !a.rhs_is_const && a.rhs_var < a.lhs) std::swap(a.lhs, a.rhs_var);
  }
  std::sort(p.atoms.begin(), p.atoms.end());
  p.atoms.erase(std::unique(p.atoms.begin(), p.atoms.end()), p.atoms.end());
  return p;
}

std::vector<std::string> predicate_variables(const Predicate& p) {
  std::vector<std::string> vars;
  for (const Atom& a : p.atoms) {
    vars.push_back(a.lhs);
    if (!a.rhs_is_const) vars.push_back(a.rhs_var);
  }
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

bool eval_atom(const Atom& a, const std::map<std::string, std::int64_t>& valuation) {
  auto lookup = [&](const std::string& name) {
    auto it = valuation.find(name);
    if (it == valuation.end())
      throw EvalError("predicate variable " + name + " has no value");
    return it->second;
  };
  std::int64_t l = lookup(a.lhs);
  std::int64_t r = a.rhs_is_const ? a.rhs_const : lookup(a.rhs_var);
  switch (a.rel) {
    case Rel::Eq: return l == r;
    case Rel::Ne: return l != r;
    case Rel::Lt: return l < r;
    case Rel::Le: return l <= r;
  }
  return false;
}

bool eval_predicate(const Predicate& p, const std::map<std::string, std::int64_t>& valuation) {
  for (const Atom& a : p.atoms)
    if (!eval_atom(a, valuation)) return false;
  return true;
}

std::string to_string(const Atom& a) {
  std::string out = a.lhs;
  out += ' ';
  out += rel_token(a.rel);
  out += ' ';
  if (a.rhs_is_const)
    out += std::to_string(a.rhs_const);
  else
    out += a.rhs_var;
  return out;
}

std::string to_string(const Predicate& p) {
  if (p.is_true()) return "TRUE";
  std::string out;
  for (std::size_t i = 0; i < p.atoms.size(); ++i) {
    if (i) out += " && ";
    out += to_string(p.atoms[i]);
  }
  return out;
}

Predicate parse_predicate(const std::string& text) {
  std::string trimmed;
  {
    auto b = text.find_first_not_of(" \t\r\n");
    auto e = text.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) throw FormatError("empty predicate");
    trimmed = text.substr(b, e - b + 1);
  }
  if (trimmed == "TRUE") return Predicate::truth();

  Predicate p;
  std::size_t pos = 0;
  while (pos != std::string::npos) {
    std::size_t next = trimmed.find("&&", pos);
    std::string part = next == std::string::npos ? trimmed.substr(pos)
                                                 : trimmed.substr(pos, next - pos);
    pos = next == std::string::npos ? next : next + 2;

    std::istringstream ps(part);
    std::string lhs, rel, rhs;
    if (!(ps >> lhs >> rel >> rhs) || (ps >> part))
      throw FormatError("predicate atom must be '<var> <rel> <var-or-int>'");

    Rel r;
    if (rel == "=") r = Rel::Eq;
    else if (rel == "!=") r = Rel::Ne;
    else if (rel == "<") r = Rel::Lt;
    else if (rel == "<=") r = Rel::Le;
    else throw FormatError("unknown relation '" + rel + "'");

    std::int64_t v = 0;
    auto [end, ec] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), v);
    if (ec == std::errc() && end == rhs.data() + rhs.size())
      p.atoms.push_back(make_atom(std::move(lhs), r, v));
    else
      p.atoms.push_back(make_atom(std::move(lhs), r, std::move(rhs)));
  }
  return canonical(std::move(p));
}

}  // namespace simpforge
