#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/nn/graph.hpp"

namespace cadenza::nn {

// Self-describing text container: layer specs, metadata, seed, and parameters
// as C hexfloats so the round trip is bit-exact.

namespace detail {

inline std::string hexd(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double unhexd(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

} // namespace detail

inline void save_model(const ModelGraph& g, std::ostream& os) {
    os << "cadenza-model 1\n";
    os << "seed " << g.rng_seed << "\n";
    for (const auto& kv : g.meta) os << "meta " << kv.first << " " << kv.second << "\n";
    os << "nodes " << g.nodes.size() << "\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        os << "node " << i << " " << to_string(n.spec.kind);
        switch (n.spec.kind) {
        case LayerKind::Input:
            os << " width " << n.spec.width;
            break;
        case LayerKind::Dense:
            os << " width " << n.spec.width << " act " << to_string(n.spec.activation);
            break;
        case LayerKind::Dropout:
            os << " rate " << detail::hexd(n.spec.drop_rate);
            break;
        case LayerKind::Gru:
            os << " width " << n.spec.width;
            break;
        case LayerKind::Concat:
            break;
        }
        if (!n.inputs.empty()) {
            os << " in";
            for (int id : n.inputs) os << " " << id;
        }
        os << "\n";
    }
    os << "outputs";
    for (int id : g.outputs) os << " " << id;
    os << "\n";
    os << "params " << g.num_param_scalars() << "\n";
    g.for_each_param([&](const Tensor& t) {
        for (double v : t.data) os << detail::hexd(v) << "\n";
    });
    os << "end\n";
}

inline void save_model(const ModelGraph& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open model file for writing: " + path);
    save_model(g, os);
    if (!os) throw IoError("failed writing model file: " + path);
}

inline ModelGraph load_model(std::istream& is) {
    std::string line;
    auto next_line = [&]() -> std::string {
        if (!std::getline(is, line)) throw ParseError("model file truncated");
        return line;
    };
    if (next_line() != "cadenza-model 1")
        throw ParseError("not a cadenza model file (bad magic line)");

    GraphBuilder builder;
    ModelGraph g;
    std::vector<std::pair<std::string, std::string>> meta;
    std::uint64_t seed = 0;
    std::vector<int> outputs;
    bool have_nodes = false;

    while (true) {
        std::istringstream ls(next_line());
        std::string tok;
        ls >> tok;
        if (tok == "seed") {
            ls >> seed;
        } else if (tok == "meta") {
            std::string key;
            ls >> key;
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            meta.emplace_back(key, rest);
        } else if (tok == "nodes") {
            std::size_t count = 0;
            ls >> count;
            for (std::size_t i = 0; i < count; ++i) {
                std::istringstream ns(next_line());
                std::string kw, kind;
                std::size_t idx;
                ns >> kw >> idx >> kind;
                if (kw != "node" || idx != i) throw ParseError("model file: bad node line");
                std::string field;
                std::size_t width = 0;
                double rate = 0.0;
                Activation act = Activation::Linear;
                std::vector<int> ins;
                while (ns >> field) {
                    if (field == "width") ns >> width;
                    else if (field == "act") {
                        std::string a;
                        ns >> a;
                        act = activation_from_string(a);
                    } else if (field == "rate") {
                        std::string r;
                        ns >> r;
                        rate = detail::unhexd(r);
                    } else if (field == "in") {
                        int id;
                        while (ns >> id) ins.push_back(id);
                    } else {
                        throw ParseError("model file: unknown node field '" + field + "'");
                    }
                }
                if (kind == "input") builder.input(width);
                else if (kind == "dense") builder.dense(ins.at(0), width, act);
                else if (kind == "dropout") builder.dropout(ins.at(0), rate);
                else if (kind == "gru") builder.gru(ins.at(0), width);
                else if (kind == "concat") builder.concat(ins);
                else throw ParseError("model file: unknown node kind '" + kind + "'");
            }
            have_nodes = true;
        } else if (tok == "outputs") {
            int id;
            while (ls >> id) outputs.push_back(id);
            break;
        } else {
            throw ParseError("model file: unexpected line '" + tok + "'");
        }
    }
    if (!have_nodes) throw ParseError("model file: missing nodes section");
    g = builder.build(outputs, seed);
    g.meta = std::move(meta);

    std::istringstream ps(next_line());
    std::string kw;
    std::size_t count = 0;
    ps >> kw >> count;
    if (kw != "params") throw ParseError("model file: missing params section");
    if (count != g.num_param_scalars())
        throw ParseError("model file: parameter count " + std::to_string(count) +
                         " does not match graph (" + std::to_string(g.num_param_scalars()) + ")");
    g.for_each_param([&](Tensor& t) {
        for (double& v : t.data) v = detail::unhexd(next_line());
    });
    if (next_line() != "end") throw ParseError("model file: missing end marker");
    return g;
}

inline ModelGraph load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open model file: " + path);
    return load_model(is);
}

} // namespace cadenza::nn
