#include "dmmv/checkpoint.hpp"

#include "dmmv/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dmmv::ad {

namespace {

constexpr const char* kMagic = "dmmv-checkpoint";
constexpr int kVersion = 1;

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(std::string("checkpoint truncated while reading ") + what);
    return line;
}

} // namespace

void write_checkpoint(std::ostream& out, const ParameterStore& store,
                      const std::map<std::string, std::string>& metadata) {
    out << kMagic << ' ' << kVersion << '\n';
    out << "meta " << metadata.size() << '\n';
    for (const auto& [k, v] : metadata) out << k << '=' << v << '\n';
    const auto params = store.all();
    out << "params " << params.size() << '\n';
    for (const auto* p : params) {
        out << "param " << p->name << ' ' << to_string(p->group) << ' ' << p->value.shape.size();
        for (auto d : p->value.shape) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            if (i) out << ' ';
            out << hex(p->value[i]);
        }
        out << '\n';
    }
    out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::map<std::string, std::string>& metadata) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    write_checkpoint(out, store, metadata);
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointData read_checkpoint(std::istream& in) {
    CheckpointData data;
    {
        std::istringstream header(next_line(in, "header"));
        std::string magic;
        int version = 0;
        header >> magic >> version;
        if (magic != kMagic || version != kVersion) throw ParseError("not a dmmv checkpoint (version 1)");
    }
    std::size_t n_meta = 0;
    {
        std::istringstream line(next_line(in, "meta count"));
        std::string tag;
        line >> tag >> n_meta;
        if (tag != "meta") throw ParseError("expected 'meta'");
    }
    for (std::size_t i = 0; i < n_meta; ++i) {
        const auto line = next_line(in, "metadata");
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("metadata line without '=': " + line);
        data.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }
    std::size_t n_params = 0;
    {
        std::istringstream line(next_line(in, "param count"));
        std::string tag;
        line >> tag >> n_params;
        if (tag != "params") throw ParseError("expected 'params'");
    }
    for (std::size_t i = 0; i < n_params; ++i) {
        std::istringstream header(next_line(in, "param header"));
        std::string tag, name, group;
        std::size_t rank = 0;
        header >> tag >> name >> group >> rank;
        if (tag != "param" || !header) throw ParseError("malformed param header");
        Shape shape(rank);
        for (auto& d : shape) header >> d;
        if (!header) throw ParseError("malformed shape for '" + name + "'");

        StoredParameter sp;
        sp.name = name;
        sp.group = parse_param_group(group);
        sp.value = Tensor(shape);
        std::istringstream values(next_line(in, "param values"));
        std::string token;
        for (std::size_t k = 0; k < sp.value.numel(); ++k) {
            if (!(values >> token)) throw ParseError("too few values for '" + name + "'");
            char* end = nullptr;
            sp.value[k] = std::strtod(token.c_str(), &end);
            if (end == token.c_str() || *end != '\0') throw ParseError("bad value '" + token + "' in '" + name + "'");
        }
        data.params.push_back(std::move(sp));
    }
    if (next_line(in, "trailer") != "end") throw ParseError("missing 'end' trailer");
    return data;
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

void apply_checkpoint(const CheckpointData& data, ParameterStore& store) {
    auto params = store.all();
    if (params.size() != data.params.size()) {
        throw ConfigMismatch("checkpoint holds " + std::to_string(data.params.size()) + " parameters, model has " +
                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& sp = data.params[i];
        if (sp.name != params[i]->name || sp.group != params[i]->group || sp.value.shape != params[i]->value.shape) {
            throw ConfigMismatch("parameter '" + sp.name + "' does not match model parameter '" + params[i]->name + "'");
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = data.params[i].value;
}

} // namespace dmmv::ad
