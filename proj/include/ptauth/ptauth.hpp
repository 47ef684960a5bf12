//===- ptauth.hpp - Umbrella header -----------------------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_PTAUTH_HPP
#define PTAUTH_PTAUTH_HPP

#include "ptauth/bench.hpp"
#include "ptauth/corpus.hpp"
#include "ptauth/instrumenter.hpp"
#include "ptauth/interpreter.hpp"
#include "ptauth/ir.hpp"
#include "ptauth/pac.hpp"
#include "ptauth/parser.hpp"
#include "ptauth/progen.hpp"
#include "ptauth/report.hpp"
#include "ptauth/runtime.hpp"
#include "ptauth/sim_memory.hpp"

#endif // PTAUTH_PTAUTH_HPP
