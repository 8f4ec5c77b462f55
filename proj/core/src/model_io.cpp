#include "tsc/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace tsc {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "TSCM/1";

json spec_to_json(const NetworkSpec& spec) {
    json layers = json::array();
    for (const LayerSpec& l : spec.layers) {
        json j{{"kind", layer_kind_name(l.kind)}};
        if (l.kind == LayerKind::dense) j["units"] = l.units;
        if (l.kind == LayerKind::conv) {
            j["filters"] = l.filters;
            j["kernel"] = l.kernel;
        }
        if (l.kind == LayerKind::dropout) j["rate"] = l.rate;
        if (!l.slot.empty()) j["slot"] = l.slot;
        if (l.kind == LayerKind::add_shortcut) {
            j["from"] = l.from;
            j["projection"] = l.projection;
        }
        layers.push_back(std::move(j));
    }
    return json{{"name", spec.name},
                {"input_len", spec.input_len},
                {"classes", spec.classes},
                {"conv_input", spec.conv_input},
                {"layers", std::move(layers)}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.input_len = j.at("input_len").get<std::size_t>();
    spec.classes = j.at("classes").get<std::size_t>();
    spec.conv_input = j.at("conv_input").get<bool>();
    for (const json& lj : j.at("layers")) {
        LayerSpec l;
        l.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
        l.units = lj.value("units", 0);
        l.filters = lj.value("filters", 0);
        l.kernel = lj.value("kernel", 0);
        l.rate = lj.value("rate", 0.0);
        l.slot = lj.value("slot", std::string());
        l.from = lj.value("from", -1);
        l.projection = lj.value("projection", false);
        spec.layers.push_back(std::move(l));
    }
    spec.validate();
    return spec;
}

json manifest_of(const SlotMap& slots) {
    json m = json::array();
    for (const auto& [slot, tensor] : slots)
        m.push_back(json{{"slot", slot}, {"shape", tensor.shape()}});
    return m;
}

void write_le_doubles(std::ofstream& out, const Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t bits;
        double v = t[i];
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void read_le_doubles(std::ifstream& in, Tensor& t) {
    std::vector<unsigned char> buf(t.size() * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw DataError("model file truncated while reading arrays");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(buf[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        t[i] = v;
    }
}

SlotMap slots_from_manifest(const json& manifest) {
    SlotMap m;
    for (const json& e : manifest) {
        auto shape = e.at("shape").get<std::vector<std::size_t>>();
        m[e.at("slot").get<std::string>()] = Tensor(std::move(shape));
    }
    return m;
}

}  // namespace

void save_model(const std::string& path, const NetworkSpec& spec, const ParameterSet& params,
                const OptimizerState* optimizer) {
    json header{{"spec", spec_to_json(spec)},
                {"params", manifest_of(params.values)},
                {"running", manifest_of(params.running)}};
    if (optimizer) {
        json o{{"kind", optimizer_kind_name(optimizer->kind)},
               {"step", optimizer->step},
               {"first", manifest_of(optimizer->first)},
               {"second", manifest_of(optimizer->second)}};
        if (optimizer->kind == OptimizerKind::adam) {
            o["lr"] = optimizer->adam.lr;
            o["beta1"] = optimizer->adam.beta1;
            o["beta2"] = optimizer->adam.beta2;
            o["epsilon"] = optimizer->adam.epsilon;
        } else {
            o["lr"] = optimizer->adadelta.lr;
            o["rho"] = optimizer->adadelta.rho;
            o["epsilon"] = optimizer->adadelta.epsilon;
        }
        header["optimizer"] = std::move(o);
    }
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    out << kFormatTag << "\n" << head.size() << "\n" << head << "\n";
    for (const auto& [slot, tensor] : params.values) write_le_doubles(out, tensor);
    for (const auto& [slot, tensor] : params.running) write_le_doubles(out, tensor);
    if (optimizer) {
        for (const auto& [slot, tensor] : optimizer->first) write_le_doubles(out, tensor);
        for (const auto& [slot, tensor] : optimizer->second) write_le_doubles(out, tensor);
    }
    if (!out) throw DataError("failed writing model file: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string tag;
    std::getline(in, tag);
    if (tag != kFormatTag) throw DataError("not a " + std::string(kFormatTag) + " file: " + path);
    std::string len_line;
    std::getline(in, len_line);
    std::size_t head_len = 0;
    try {
        head_len = std::stoul(len_line);
    } catch (const std::exception&) {
        throw DataError("malformed model header length");
    }
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    char nl = 0;
    in.get(nl);
    if (!in || nl != '\n') throw DataError("malformed model header");

    json header = json::parse(head, nullptr, false);
    if (header.is_discarded()) throw DataError("model header is not valid JSON");

    LoadedModel model;
    model.spec = spec_from_json(header.at("spec"));
    model.params.values = slots_from_manifest(header.at("params"));
    model.params.running = slots_from_manifest(header.at("running"));
    for (auto& [slot, tensor] : model.params.values) read_le_doubles(in, tensor);
    for (auto& [slot, tensor] : model.params.running) read_le_doubles(in, tensor);

    if (header.contains("optimizer")) {
        const json& o = header.at("optimizer");
        OptimizerState s;
        s.kind = optimizer_kind_from_name(o.at("kind").get<std::string>());
        s.step = o.at("step").get<long>();
        if (s.kind == OptimizerKind::adam) {
            s.adam.lr = o.at("lr").get<double>();
            s.adam.beta1 = o.at("beta1").get<double>();
            s.adam.beta2 = o.at("beta2").get<double>();
            s.adam.epsilon = o.at("epsilon").get<double>();
        } else {
            s.adadelta.lr = o.at("lr").get<double>();
            s.adadelta.rho = o.at("rho").get<double>();
            s.adadelta.epsilon = o.at("epsilon").get<double>();
        }
        s.first = slots_from_manifest(o.at("first"));
        s.second = slots_from_manifest(o.at("second"));
        for (auto& [slot, tensor] : s.first) read_le_doubles(in, tensor);
        for (auto& [slot, tensor] : s.second) read_le_doubles(in, tensor);
        model.optimizer = std::move(s);
    }
    return model;
}

}  // namespace tsc
