#include "rhv/error.hpp"
#include "rhv/parsers.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace rhv {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

json parse_json(std::string_view text)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::SyntaxError, e.what(), e.byte);
    }
}

void check_keys(const json &obj, const std::set<std::string> &required, const std::set<std::string> &optional,
                const std::string &where)
{
    if (!obj.is_object())
        throw Error(ErrorKind::SchemaError, where + " must be an object");
    for (const auto &key : required)
        if (!obj.contains(key))
            throw Error(ErrorKind::SchemaError, where + " is missing field '" + key + "'");
    for (const auto &[key, value] : obj.items())
        if (!required.count(key) && !optional.count(key))
            throw Error(ErrorKind::SchemaError, where + " has unexpected field '" + key + "'");
}

double number_at(const json &v, const std::string &where)
{
    if (!v.is_number())
        throw Error(ErrorKind::SchemaError, where + " must be a number");
    return v.get<double>();
}

int integer_at(const json &v, const std::string &where)
{
    if (!v.is_number_integer())
        throw Error(ErrorKind::SchemaError, where + " must be an integer");
    return v.get<int>();
}

std::vector<double> vector_at(const json &v, const std::string &where)
{
    if (!v.is_array())
        throw Error(ErrorKind::SchemaError, where + " must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number_at(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

LayerKind kind_from(const json &v, const std::string &where)
{
    if (!v.is_string())
        throw Error(ErrorKind::SchemaError, where + " must be a string");
    const auto s = v.get<std::string>();
    if (s == "Input")
        return LayerKind::Input;
    if (s == "Gemm")
        return LayerKind::Gemm;
    if (s == "ReLU")
        return LayerKind::ReLU;
    throw Error(ErrorKind::SchemaError, where + " has unknown layer kind '" + s + "'");
}

} // namespace

NetworkGraph parse_network_json(std::string_view text)
{
    const json doc = parse_json(text);
    check_keys(doc, {"format_version", "input_dim", "layers"}, {}, "network");
    const int version = integer_at(doc["format_version"], "format_version");
    if (version != kNetworkFormatVersion)
        throw Error(ErrorKind::SchemaError, "unsupported format_version " + std::to_string(version));
    const int input_dim = integer_at(doc["input_dim"], "input_dim");
    if (input_dim <= 0)
        throw Error(ErrorKind::SchemaError, "input_dim must be positive");
    const auto &layers = doc["layers"];
    if (!layers.is_array())
        throw Error(ErrorKind::SchemaError, "layers must be an array");
    if (layers.empty())
        throw Error(ErrorKind::SchemaError, "layers is empty");

    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "layers[" + std::to_string(i) + "]";
        const auto &obj = layers[i];
        if (!obj.is_object() || !obj.contains("kind"))
            throw Error(ErrorKind::SchemaError, where + " is missing field 'kind'");
        LayerSpec spec;
        spec.kind = kind_from(obj["kind"], where + ".kind");
        switch (spec.kind) {
        case LayerKind::Input: check_keys(obj, {"id", "kind"}, {"inputs"}, where); break;
        case LayerKind::ReLU: check_keys(obj, {"id", "kind", "inputs"}, {}, where); break;
        case LayerKind::Gemm: check_keys(obj, {"id", "kind", "inputs", "weights", "bias"}, {}, where); break;
        }
        spec.id = integer_at(obj["id"], where + ".id");
        if (obj.contains("inputs")) {
            const auto &inputs = obj["inputs"];
            if (!inputs.is_array())
                throw Error(ErrorKind::SchemaError, where + ".inputs must be an array");
            for (std::size_t k = 0; k < inputs.size(); ++k)
                spec.inputs.push_back(integer_at(inputs[k], where + ".inputs[" + std::to_string(k) + "]"));
        }
        if (spec.kind == LayerKind::Gemm) {
            const auto &w = obj["weights"];
            if (!w.is_array())
                throw Error(ErrorKind::SchemaError, where + ".weights must be an array of rows");
            std::vector<std::vector<double>> rows;
            for (std::size_t r = 0; r < w.size(); ++r)
                rows.push_back(vector_at(w[r], where + ".weights[" + std::to_string(r) + "]"));
            try {
                spec.weights = Matrix::from_rows(rows);
            } catch (const Error &) {
                throw Error(ErrorKind::DimensionMismatch, where + " has ragged weight rows");
            }
            spec.bias = vector_at(obj["bias"], where + ".bias");
        }
        specs.push_back(std::move(spec));
    }
    return build_graph(std::move(specs), static_cast<std::size_t>(input_dim));
}

std::string emit_network_json(const NetworkGraph &net)
{
    ordered_json doc;
    doc["format_version"] = kNetworkFormatVersion;
    doc["input_dim"] = net.input_dim();
    ordered_json layers = ordered_json::array();
    for (const auto &spec : net.layers()) {
        ordered_json obj;
        obj["id"] = spec.id;
        obj["kind"] = to_string(spec.kind);
        obj["inputs"] = spec.inputs;
        if (spec.kind == LayerKind::Gemm) {
            ordered_json rows = ordered_json::array();
            for (std::size_t r = 0; r < spec.weights.rows; ++r) {
                const auto row = spec.weights.row(r);
                rows.push_back(std::vector<double>(row.begin(), row.end()));
            }
            obj["weights"] = std::move(rows);
            obj["bias"] = spec.bias;
        }
        layers.push_back(std::move(obj));
    }
    doc["layers"] = std::move(layers);
    return doc.dump(2) + "\n";
}

std::string emit_bounds_json(const BoundStore &store, const BoundsMetadata &meta)
{
    auto pairs = [](const IntervalVector &ivs) {
        ordered_json arr = ordered_json::array();
        for (const auto &iv : ivs)
            arr.push_back({iv.lo, iv.hi});
        return arr;
    };
    ordered_json doc;
    doc["format_version"] = kBoundsFormatVersion;
    if (!meta.method.empty())
        doc["method"] = meta.method;
    if (meta.horizon)
        doc["horizon"] = *meta.horizon;
    if (!meta.windows.empty()) {
        ordered_json w = ordered_json::array();
        for (const auto &[s, t] : meta.windows)
            w.push_back({s, t});
        doc["windows"] = std::move(w);
    }
    ordered_json pre = ordered_json::object();
    ordered_json post = ordered_json::object();
    post["0"] = pairs(store.input());
    for (int i = 1; i <= store.num_gemms(); ++i) {
        pre[std::to_string(i)] = pairs(store.pre(i));
        if (store.has_relu(i))
            post[std::to_string(i)] = pairs(store.post(i));
    }
    doc["pre"] = std::move(pre);
    doc["post"] = std::move(post);
    return doc.dump(2) + "\n";
}

namespace {

IntervalVector intervals_at(const json &v, const std::string &where)
{
    if (!v.is_array())
        throw Error(ErrorKind::SchemaError, where + " must be an array of [lo, hi] pairs");
    IntervalVector out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string item = where + "[" + std::to_string(k) + "]";
        if (!v[k].is_array() || v[k].size() != 2)
            throw Error(ErrorKind::SchemaError, item + " must be a [lo, hi] pair");
        const Interval iv{number_at(v[k][0], item), number_at(v[k][1], item)};
        if (!(iv.lo <= iv.hi))
            throw Error(ErrorKind::InfeasibleBounds, item + " has lo > hi");
        out.push_back(iv);
    }
    return out;
}

} // namespace

BoundStore parse_bounds_json(std::string_view text, const NetworkGraph &net,
                             const std::optional<IntervalVector> &input_box)
{
    const json doc = parse_json(text);
    check_keys(doc, {"pre"}, {"format_version", "method", "horizon", "windows", "post"}, "bounds");
    if (doc.contains("format_version") && integer_at(doc["format_version"], "format_version") != kBoundsFormatVersion)
        throw Error(ErrorKind::SchemaError, "unsupported bounds format_version");

    IntervalVector box;
    if (doc.contains("post") && doc["post"].contains("0"))
        box = intervals_at(doc["post"]["0"], "post.0");
    else if (input_box)
        box = *input_box;
    else
        throw Error(ErrorKind::SchemaError, "bounds file has no input box (post.0) and none was supplied");

    BoundStore store(net, box);
    const auto &pre = doc["pre"];
    if (!pre.is_object())
        throw Error(ErrorKind::SchemaError, "pre must be an object keyed by layer ordinal");
    for (int i = 1; i <= net.num_gemms(); ++i) {
        const auto key = std::to_string(i);
        if (!pre.contains(key))
            throw Error(ErrorKind::SchemaError, "pre is missing layer " + key);
        const auto ivs = intervals_at(pre[key], "pre." + key);
        if (ivs.size() != net.width(i))
            throw Error(ErrorKind::DimensionMismatch, "pre." + key + " has " + std::to_string(ivs.size()) +
                                                          " entries, layer has " + std::to_string(net.width(i)));
        store.tighten_pre(i, ivs);
    }
    for (const auto &[key, value] : pre.items()) {
        char *end = nullptr;
        const long idx = std::strtol(key.c_str(), &end, 10);
        if (*end != '\0' || idx < 1 || idx > net.num_gemms())
            throw Error(ErrorKind::SchemaError, "pre has unexpected layer key '" + key + "'");
    }
    return store;
}

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string &path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << contents;
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

} // namespace rhv
