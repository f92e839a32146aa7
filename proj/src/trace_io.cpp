#include "pmx/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmx {

void write_trace_header(std::ostream& os, const Trace& trace) {
    os << "trace chain " << trace.chain_index << " seed " << trace.seed << " n "
       << trace.n_events << " model " << to_string(trace.model) << "\n";
}

void write_trace_records(std::ostream& os, const Trace& trace) {
    char buf[256];
    for (const auto& rec : trace.iterations) {
        std::snprintf(buf, sizeof buf, "iter %d k_s %zu k_b %u eta_s %.17g eta_b %.17g n_src %llu\n",
                      rec.iter, rec.sources.size(), rec.k_b, rec.eta_s, rec.eta_b,
                      static_cast<unsigned long long>(rec.n_src));
        os << buf;
        for (const auto& s : rec.sources) {
            std::snprintf(buf, sizeof buf, "mu %.17g %.17g %llu\n", s.x, s.y,
                          static_cast<unsigned long long>(s.count));
            os << buf;
        }
        for (const auto& b : rec.background) {
            std::snprintf(buf, sizeof buf,
                          "bg %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %llu\n",
                          b.ell[0], b.ell[1], b.ell[2], b.ell[3], b.ell[4], b.b[0], b.b[1],
                          b.b[2], b.b[3], b.b[4], static_cast<unsigned long long>(b.count));
            os << buf;
        }
    }
}

void write_trace(const std::string& path, const Trace& trace) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot create trace file: " + path);
    write_trace_header(os, trace);
    write_trace_records(os, trace);
}

void append_trace_records(const std::string& path, const Trace& trace) {
    std::ofstream os(path, std::ios::app);
    if (!os) throw std::runtime_error("cannot open trace file for append: " + path);
    write_trace_records(os, trace);
}

Trace read_trace(std::istream& is) {
    Trace trace;
    std::string tok, model_name;
    if (!(is >> tok) || tok != "trace")
        throw std::runtime_error("trace: missing 'trace' header");
    if (!(is >> tok >> trace.chain_index) || tok != "chain")
        throw std::runtime_error("trace: malformed header (chain)");
    if (!(is >> tok >> trace.seed) || tok != "seed")
        throw std::runtime_error("trace: malformed header (seed)");
    if (!(is >> tok >> trace.n_events) || tok != "n")
        throw std::runtime_error("trace: malformed header (n)");
    if (!(is >> tok >> model_name) || tok != "model")
        throw std::runtime_error("trace: malformed header (model)");
    trace.model = model_from_string(model_name);

    while (is >> tok) {
        if (tok == "iter") {
            TraceIteration rec;
            std::size_t k_s;
            std::string t1, t2, t3, t4, t5;
            if (!(is >> rec.iter >> t1 >> k_s >> t2 >> rec.k_b >> t3 >> rec.eta_s >> t4 >>
                  rec.eta_b >> t5 >> rec.n_src) ||
                t1 != "k_s" || t2 != "k_b" || t3 != "eta_s" || t4 != "eta_b" || t5 != "n_src")
                throw std::runtime_error("trace: malformed iteration record");
            rec.sources.reserve(k_s);
            trace.iterations.push_back(std::move(rec));
        } else if (tok == "mu") {
            if (trace.iterations.empty())
                throw std::runtime_error("trace: 'mu' before any iteration record");
            TraceIteration::SourceSnap s;
            if (!(is >> s.x >> s.y >> s.count))
                throw std::runtime_error("trace: malformed mu line");
            trace.iterations.back().sources.push_back(s);
        } else if (tok == "bg") {
            if (trace.iterations.empty())
                throw std::runtime_error("trace: 'bg' before any iteration record");
            TraceIteration::BgSnap b;
            for (double& v : b.ell)
                if (!(is >> v)) throw std::runtime_error("trace: malformed bg line");
            for (double& v : b.b)
                if (!(is >> v)) throw std::runtime_error("trace: malformed bg line");
            if (!(is >> b.count)) throw std::runtime_error("trace: malformed bg line");
            trace.iterations.back().background.push_back(b);
        } else {
            throw std::runtime_error("trace: unexpected token '" + tok + "'");
        }
    }
    return trace;
}

Trace read_trace(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open trace file: " + path);
    return read_trace(is);
}

}  // namespace pmx
