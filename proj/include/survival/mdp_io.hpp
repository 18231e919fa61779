#pragma once

// Text formats for MDPs and policies.
//
// MDP file:
//   mdp <n_states> <n_actions> gamma=<g> | horizon=<H>
//   d0 <p_0> ... <p_{S-1}>
//   terminal <s> ...              (finite models only, may list nothing)
//   <s> <a> <r> <p(s'=0)> ... <p(s'=S-1)>   one line per (s,a), row-major
//
// Policy file:
//   policy stationary <S> <A>      then lines "s a prob"
//   policy time-indexed <H> <S> <A> then lines "h s a prob"
// Only nonzero probabilities are written; '#' starts a comment line.

#include <string>
#include <variant>

#include "survival/mdp.hpp"

namespace survival {

using AnyMdp = std::variant<TabularMdp, FiniteMdp>;

std::string write_mdp(const TabularMdp& mdp);
std::string write_mdp(const FiniteMdp& mdp);
AnyMdp parse_mdp(const std::string& text);
AnyMdp load_mdp(const std::string& path);

std::string write_policy(const Policy& policy);
Policy parse_policy(const std::string& text);

}  // namespace survival
