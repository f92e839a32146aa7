#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmx/sampler.hpp"

namespace pmx {

/// Trace file: a `trace chain <k> seed <s> n <n> model <m>` header, then one
/// record per retained iteration —
///   iter <t> k_s <k> k_b <k> eta_s <v> eta_b <v> n_src <n>
/// followed by `mu <x> <y> <count>` per source cluster and, when background
/// recording was on, `bg <5 x-knots> <5 y-knots> <count>` per component.
void write_trace_header(std::ostream& os, const Trace& trace);
void write_trace_records(std::ostream& os, const Trace& trace);
void write_trace(const std::string& path, const Trace& trace);
void append_trace_records(const std::string& path, const Trace& trace);

Trace read_trace(const std::string& path);
Trace read_trace(std::istream& is);

}  // namespace pmx
