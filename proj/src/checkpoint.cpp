#include "aebound/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aebound/errors.hpp"
#include "json.hpp"

namespace aebound {

using nlohmann::json;

std::string checkpoint_to_string(const NetworkParams& params) {
    json j;
    const auto layers = params.layers();
    json dims = json::array({layers.front().in_dim()});
    json acts = json::array();
    json weights = json::array();
    json biases = json::array();
    for (const Layer& l : layers) {
        dims.push_back(l.out_dim());
        acts.push_back(std::string(to_string(l.activation)));
        weights.push_back(std::vector<double>(l.weights.values().begin(), l.weights.values().end()));
        biases.push_back(l.bias);
    }
    j["dims"] = std::move(dims);
    j["bottleneck_index"] = params.bottleneck_index();
    j["activations"] = std::move(acts);
    j["weights"] = std::move(weights);
    if (params.has_bias()) j["biases"] = std::move(biases);
    return j.dump(1) + "\n";
}

NetworkParams checkpoint_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(DataErrorCode::malformed, std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        const auto dims = j.at("dims").get<std::vector<std::size_t>>();
        const auto acts = j.at("activations").get<std::vector<std::string>>();
        const auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
        const auto bottleneck = j.at("bottleneck_index").get<std::size_t>();
        std::vector<std::vector<double>> biases;
        if (j.contains("biases")) biases = j.at("biases").get<std::vector<std::vector<double>>>();

        if (dims.size() < 2 || acts.size() != dims.size() - 1 || weights.size() != dims.size() - 1)
            throw DataError(DataErrorCode::malformed, "checkpoint: dims/activations/weights lengths disagree");
        if (!biases.empty() && biases.size() != weights.size())
            throw DataError(DataErrorCode::malformed, "checkpoint: biases length disagrees with weights");
        std::vector<Layer> layers;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            Layer l{Matrix(dims[i + 1], dims[i], weights[i]), parse_activation(acts[i]), {}};
            if (!biases.empty()) l.bias = biases[i];
            layers.push_back(std::move(l));
        }
        return NetworkParams(std::move(layers), bottleneck);
    } catch (const json::exception& e) {
        throw DataError(DataErrorCode::malformed, std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(DataErrorCode::malformed, std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError(DataErrorCode::io, "cannot write checkpoint " + path.string());
    out << checkpoint_to_string(params);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorCode::io, "cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

}  // namespace aebound
