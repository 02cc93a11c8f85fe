#include "inclass/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace inclass {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

const char* activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "linear";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw io_error("checkpoint: unknown activation '" + name + "'");
}

/// Token reader that reports the expected field name on mismatch.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word(const char* field) {
        std::string token;
        if (!(in_ >> token)) throw io_error(std::string("checkpoint: missing field '") + field + "'");
        return token;
    }

    void expect(const char* field) {
        const std::string token = word(field);
        if (token != field)
            throw io_error(std::string("checkpoint: expected field '") + field + "', found '" +
                           token + "'");
    }

    std::uint64_t integer(const char* field) {
        const std::string token = word(field);
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(token, &pos);
            if (pos != token.size()) throw std::invalid_argument(token);
            return v;
        } catch (const std::exception&) {
            throw io_error(std::string("checkpoint: bad value for field '") + field + "': '" +
                           token + "'");
        }
    }

    double real(const char* field) {
        const std::string token = word(field);
        try {
            std::size_t pos = 0;
            const double v = std::stod(token, &pos);
            if (pos != token.size()) throw std::invalid_argument(token);
            return v;
        } catch (const std::exception&) {
            throw io_error(std::string("checkpoint: bad number in '") + field + "': '" + token +
                           "'");
        }
    }

private:
    std::istream& in_;
};

} // namespace

void save_checkpoint(const InClassNet& net, const std::string& path) {
    std::ostringstream out;
    out << "inclassnet-checkpoint v1\n";
    out << "seed " << net.seed() << "\n";
    out << "variates " << net.variate_count() << "\n";
    out << "classes";
    for (std::size_t v = 0; v < net.variate_count(); ++v) out << " " << net.class_count(v);
    out << "\n";
    out << "dims";
    for (std::size_t v = 0; v < net.variate_count(); ++v) out << " " << net.variate_dim(v);
    out << "\n";
    out << "sharing";
    for (std::size_t id : net.sharing()) out << " " << id;
    out << "\n";
    out << "paramsets " << net.paramset_count() << "\n";
    for (std::size_t k = 0; k < net.paramset_count(); ++k) {
        const MLPClassifier& clf = net.paramset(k);
        out << "paramset " << k << "\n";
        out << "input " << clf.input_dim() << "\n";
        out << "output " << clf.output_dim() << "\n";
        out << "transform " << (clf.has_input_transform() ? 1 : 0) << "\n";
        if (clf.has_input_transform()) {
            out << "shift";
            for (double s : clf.input_shift()) out << " " << format_double(s);
            out << "\nscale";
            for (double s : clf.input_scale()) out << " " << format_double(s);
            out << "\n";
        }
        out << "layers " << clf.layers().size() << "\n";
        for (const DenseLayer& layer : clf.layers()) {
            out << "layer " << layer.out_dim() << " " << layer.in_dim() << " "
                << activation_name(layer.activation) << "\n";
            for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                for (std::size_t c = 0; c < layer.in_dim(); ++c) {
                    if (c) out << " ";
                    out << format_double(layer.weights.at(r, c));
                }
                out << "\n";
            }
            out << "bias";
            for (double b : layer.bias) out << " " << format_double(b);
            out << "\n";
        }
    }
    out << "end\n";
    write_file(path, out.str());
}

InClassNet load_checkpoint(const std::string& path) {
    std::istringstream in(read_file(path));
    TokenReader reader(in);

    reader.expect("inclassnet-checkpoint");
    const std::string version = reader.word("version");
    if (version != "v1") throw io_error("checkpoint: unsupported version '" + version + "'");
    reader.expect("seed");
    const std::uint64_t seed = reader.integer("seed");
    reader.expect("variates");
    const std::size_t v_count = reader.integer("variates");
    if (v_count == 0) throw io_error("checkpoint: bad value for field 'variates'");
    reader.expect("classes");
    std::vector<std::size_t> classes(v_count);
    for (auto& c : classes) c = reader.integer("classes");
    reader.expect("dims");
    std::vector<std::size_t> dims(v_count);
    for (auto& d : dims) d = reader.integer("dims");
    reader.expect("sharing");
    std::vector<std::size_t> sharing(v_count);
    for (auto& s : sharing) s = reader.integer("sharing");
    reader.expect("paramsets");
    const std::size_t num_sets = reader.integer("paramsets");
    for (std::size_t id : sharing)
        if (id >= num_sets) throw io_error("checkpoint: sharing references missing paramset");

    std::vector<MLPClassifier> paramsets(num_sets);
    for (std::size_t k = 0; k < num_sets; ++k) {
        reader.expect("paramset");
        if (reader.integer("paramset-id") != k)
            throw io_error("checkpoint: paramset ids out of order");
        reader.expect("input");
        const std::size_t input = reader.integer("input");
        reader.expect("output");
        const std::size_t output = reader.integer("output");
        reader.expect("transform");
        const std::uint64_t has_transform = reader.integer("transform");
        std::vector<double> shift, scale;
        if (has_transform == 1) {
            reader.expect("shift");
            shift.resize(input);
            for (double& s : shift) s = reader.real("shift");
            reader.expect("scale");
            scale.resize(input);
            for (double& s : scale) s = reader.real("scale");
        } else if (has_transform != 0) {
            throw io_error("checkpoint: bad value for field 'transform'");
        }
        reader.expect("layers");
        const std::size_t layer_count = reader.integer("layers");

        // Build widths then overwrite every parameter with stored values.
        std::vector<DenseLayer> layers(layer_count);
        std::size_t expect_in = input;
        for (std::size_t l = 0; l < layer_count; ++l) {
            reader.expect("layer");
            const std::size_t out_dim = reader.integer("layer-out");
            const std::size_t in_dim = reader.integer("layer-in");
            const Activation act = activation_from_name(reader.word("layer-activation"));
            if (in_dim != expect_in)
                throw io_error("checkpoint: layer input width mismatch in paramset " +
                               std::to_string(k));
            layers[l].weights = Tensor2(out_dim, in_dim);
            layers[l].bias.assign(out_dim, 0.0);
            layers[l].activation = act;
            for (std::size_t r = 0; r < out_dim; ++r)
                for (std::size_t c = 0; c < in_dim; ++c)
                    layers[l].weights.at(r, c) = reader.real("weights");
            reader.expect("bias");
            for (std::size_t r = 0; r < out_dim; ++r) layers[l].bias[r] = reader.real("bias");
            expect_in = out_dim;
        }
        if (expect_in != output)
            throw io_error("checkpoint: final layer width differs from declared output");

        // Assemble via a scratch net of the right shape, then insert weights.
        std::vector<std::size_t> hidden;
        for (std::size_t l = 0; l + 1 < layer_count; ++l) hidden.push_back(layers[l].out_dim());
        SplitMix64 scratch_rng(0);
        MLPClassifier clf(input, hidden, output, scratch_rng);
        clf.layers() = std::move(layers);
        if (has_transform == 1) clf.set_input_transform(std::move(shift), std::move(scale));
        paramsets[k] = std::move(clf);
    }
    reader.expect("end");

    InClassNet net(std::move(paramsets), std::move(sharing), seed);
    for (std::size_t v = 0; v < v_count; ++v) {
        if (net.class_count(v) != classes[v])
            throw io_error("checkpoint: declared classes differ from stored layers");
        if (net.variate_dim(v) != dims[v])
            throw io_error("checkpoint: declared dims differ from stored layers");
    }
    return net;
}

std::vector<std::string> default_group_names(std::size_t variates) {
    static const char* kNames[3] = {"x", "y", "z"};
    std::vector<std::string> names(variates);
    for (std::size_t v = 0; v < variates; ++v)
        names[v] = variates <= 3 ? kNames[v] : "v" + std::to_string(v);
    return names;
}

namespace {

std::vector<std::string> effective_names(const Dataset& data,
                                         const std::vector<std::string>& group_names) {
    if (group_names.empty()) return default_group_names(data.variate_count());
    if (group_names.size() != data.variate_count())
        throw config_error("dataset writer: one group name per variate required");
    return group_names;
}

} // namespace

void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::vector<std::string>& group_names) {
    data.validate();
    const std::vector<std::string> names = effective_names(data, group_names);
    std::ostringstream out;
    for (std::size_t v = 0; v < data.variate_count(); ++v) {
        if (v) out << "|";
        const std::size_t dim = data.variates[v].cols();
        for (std::size_t d = 0; d < dim; ++d) {
            if (d) out << ",";
            out << names[v];
            if (dim > 1) out << d;
        }
    }
    if (data.labels) out << "|label";
    out << "\n";

    for (std::size_t r = 0; r < data.rows(); ++r) {
        bool first = true;
        for (std::size_t v = 0; v < data.variate_count(); ++v) {
            for (std::size_t d = 0; d < data.variates[v].cols(); ++d) {
                if (!first) out << ",";
                first = false;
                out << format_double(data.variates[v].at(r, d));
            }
        }
        if (data.labels) out << "," << (*data.labels)[r];
        out << "\n";
    }
    write_file(path, out.str());
}

void write_dataset_jsonl(const Dataset& data, const std::string& path,
                         const std::vector<std::string>& group_names) {
    data.validate();
    const std::vector<std::string> names = effective_names(data, group_names);
    std::ostringstream out;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        out << "{";
        for (std::size_t v = 0; v < data.variate_count(); ++v) {
            if (v) out << ",";
            out << "\"" << names[v] << "\":[";
            for (std::size_t d = 0; d < data.variates[v].cols(); ++d) {
                if (d) out << ",";
                out << format_double(data.variates[v].at(r, d));
            }
            out << "]";
        }
        if (data.labels) out << ",\"label\":" << (*data.labels)[r];
        out << "}\n";
    }
    write_file(path, out.str());
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

} // namespace

NamedDataset read_dataset_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string header;
    if (!std::getline(in, header)) throw ingestion_error("dataset: empty file " + path);
    header = strip_cr(header);

    NamedDataset out;
    std::vector<std::size_t> dims;
    bool has_label = false;
    {
        const std::vector<std::string> groups = split(header, '|');
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const std::vector<std::string> cols = split(groups[g], ',');
            if (cols.size() == 1 && cols[0] == "label") {
                if (g + 1 != groups.size())
                    throw ingestion_error("dataset: label group must come last");
                has_label = true;
                continue;
            }
            if (cols.empty() || cols[0].empty())
                throw ingestion_error("dataset: empty header group");
            dims.push_back(cols.size());
            // Multi-column groups drop the index suffix from the shared prefix.
            std::string name = cols[0];
            if (cols.size() > 1) {
                while (!name.empty() && std::isdigit(static_cast<unsigned char>(name.back())))
                    name.pop_back();
            }
            out.group_names.push_back(name.empty() ? cols[0] : name);
        }
    }
    if (dims.empty()) throw ingestion_error("dataset: header declares no variates");

    std::size_t total = has_label ? 1 : 0;
    for (std::size_t d : dims) total += d;

    std::vector<std::vector<double>> columns_data(dims.size());
    std::vector<int> labels;
    std::string line;
    std::size_t row = 0;
    std::size_t rows = 0;
    for (; std::getline(in, line); ++row) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != total)
            throw ingestion_error("dataset: wrong cell count in " + path, row + 1, cells.size());
        std::size_t cell = 0;
        for (std::size_t v = 0; v < dims.size(); ++v) {
            for (std::size_t d = 0; d < dims[v]; ++d, ++cell) {
                double value = 0.0;
                try {
                    std::size_t pos = 0;
                    value = std::stod(cells[cell], &pos);
                    if (pos != cells[cell].size()) throw std::invalid_argument(cells[cell]);
                } catch (const std::exception&) {
                    throw ingestion_error("dataset: unparsable cell '" + cells[cell] + "'",
                                          row + 1, cell);
                }
                if (!std::isfinite(value))
                    throw ingestion_error("dataset: non-finite cell", row + 1, cell);
                columns_data[v].push_back(value);
            }
        }
        if (has_label) {
            try {
                std::size_t pos = 0;
                const int label = std::stoi(cells[cell], &pos);
                if (pos != cells[cell].size()) throw std::invalid_argument(cells[cell]);
                labels.push_back(label);
            } catch (const std::exception&) {
                throw ingestion_error("dataset: unparsable label '" + cells[cell] + "'", row + 1,
                                      cell);
            }
        }
        ++rows;
    }
    if (rows == 0) throw ingestion_error("dataset: no data rows in " + path);

    for (std::size_t v = 0; v < dims.size(); ++v)
        out.data.variates.emplace_back(rows, dims[v], std::move(columns_data[v]));
    if (has_label) out.data.labels = std::move(labels);
    out.data.validate();
    return out;
}

NamedDataset read_dataset_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    NamedDataset out;
    std::vector<std::size_t> dims;
    std::vector<std::vector<double>> columns_data;
    std::vector<int> labels;
    bool has_label = false;

    std::string line;
    std::size_t rows = 0;
    for (std::size_t row = 0; std::getline(in, line); ++row) {
        line = strip_cr(line);
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ingestion_error("dataset: bad JSON line " + std::to_string(row + 1) + ": " +
                                  e.what());
        }
        if (!obj.is_object())
            throw ingestion_error("dataset: JSONL line is not an object", row + 1, 0);

        if (rows == 0) {
            for (const auto& [key, value] : obj.items()) {
                if (key == "label") {
                    has_label = true;
                    continue;
                }
                if (!value.is_array())
                    throw ingestion_error("dataset: variate '" + key + "' is not an array");
                out.group_names.push_back(key);
                dims.push_back(value.size());
            }
            if (dims.empty()) throw ingestion_error("dataset: JSONL rows declare no variates");
            columns_data.resize(dims.size());
        }

        for (std::size_t v = 0; v < dims.size(); ++v) {
            const auto it = obj.find(out.group_names[v]);
            if (it == obj.end() || !it->is_array() || it->size() != dims[v])
                throw ingestion_error("dataset: inconsistent variate '" + out.group_names[v] +
                                          "'",
                                      row + 1, v);
            for (std::size_t d = 0; d < dims[v]; ++d) {
                const double value = (*it)[d].get<double>();
                if (!std::isfinite(value))
                    throw ingestion_error("dataset: non-finite cell", row + 1, d);
                columns_data[v].push_back(value);
            }
        }
        if (has_label) {
            const auto it = obj.find("label");
            if (it == obj.end() || !it->is_number_integer())
                throw ingestion_error("dataset: missing integer label", row + 1, 0);
            labels.push_back(it->get<int>());
        }
        ++rows;
    }
    if (rows == 0) throw ingestion_error("dataset: no data rows in " + path);
    for (std::size_t v = 0; v < dims.size(); ++v)
        out.data.variates.emplace_back(rows, dims[v], std::move(columns_data[v]));
    if (has_label) out.data.labels = std::move(labels);
    out.data.validate();
    return out;
}

NamedDataset read_dataset(const std::string& path) {
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl")
        return read_dataset_jsonl(path);
    return read_dataset_csv(path);
}

void write_train_log_csv(const std::vector<EpochRecord>& log, const std::string& path) {
    std::ostringstream out;
    out << "epoch,cost,wall_seconds\n";
    for (const auto& rec : log)
        out << rec.epoch << "," << format_double(rec.mean_cost) << ","
            << format_double(rec.wall_seconds) << "\n";
    write_file(path, out.str());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << content;
    if (!out) throw io_error("write failed for " + path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return buf;
}

std::string file_hash(const std::string& path) { return fnv1a_hex(read_file(path)); }

} // namespace inclass
