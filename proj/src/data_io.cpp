#include "vrd/data_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vrd {
namespace {

constexpr char kFeatureMagic[4] = {'V', 'R', 'D', 'F'};

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

std::ostream& full_precision(std::ostream& os) {
    os << std::setprecision(17);
    return os;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    buf[0] = static_cast<unsigned char>(v & 0xff);
    buf[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    buf[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    buf[3] = static_cast<unsigned char>((v >> 24) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

Box parse_box(std::istringstream& fields, const std::string& path, std::size_t line_no) {
    Box b;
    if (!(fields >> b.x_min >> b.y_min >> b.x_max >> b.y_max)) {
        parse_fail(path, line_no, "malformed box coordinates");
    }
    if (!box_valid(b)) parse_fail(path, line_no, "degenerate or non-finite box");
    return b;
}

int parse_label(std::istringstream& fields, const Vocabulary& vocab, const std::string& path,
                std::size_t line_no) {
    std::string name;
    if (!(fields >> name)) parse_fail(path, line_no, "missing label field");
    const int idx = vocab.index(name);
    if (idx < 0) parse_fail(path, line_no, "unknown label: " + name);
    return idx;
}

}  // namespace

FeatureStore::FeatureStore(std::size_t dim, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw std::invalid_argument("feature dimensionality must be positive");
    if (values_.size() % dim_ != 0) {
        throw std::invalid_argument("feature payload is not a whole number of rows");
    }
    for (float v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    }
}

std::span<const float> FeatureStore::row(std::uint32_t ref) const {
    if (ref >= count()) {
        throw std::out_of_range("feature_ref " + std::to_string(ref) + " out of range (count " +
                                std::to_string(count()) + ")");
    }
    return std::span<const float>(values_.data() + static_cast<std::size_t>(ref) * dim_, dim_);
}

void FeatureStore::append_row(std::span<const float> row) {
    if (dim_ == 0) dim_ = row.size();
    if (row.size() != dim_) throw std::invalid_argument("feature row has wrong dimensionality");
    values_.insert(values_.end(), row.begin(), row.end());
}

DetectionSet read_detections(const std::string& path, const Vocabulary& objects) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open detections file: " + path);
    DetectionSet out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string image_id;
        ImageSize size;
        if (!(fields >> image_id >> size.w >> size.h)) {
            parse_fail(path, line_no, "malformed detection record");
        }
        if (!(size.w > 0) || !(size.h > 0)) parse_fail(path, line_no, "non-positive image size");
        Detection det;
        det.image_id = image_id;
        det.label = parse_label(fields, objects, path, line_no);
        std::string ref_field;
        if (!(fields >> det.score)) parse_fail(path, line_no, "malformed score");
        det.box = parse_box(fields, path, line_no);
        if (!(fields >> ref_field)) parse_fail(path, line_no, "missing feature_ref");
        if (!(det.score >= 0.0 && det.score <= 1.0)) {
            parse_fail(path, line_no, "score outside [0,1]: " + std::to_string(det.score));
        }
        if (ref_field != "-") {
            try {
                det.feature_ref = static_cast<std::uint32_t>(std::stoul(ref_field));
            } catch (const std::exception&) {
                parse_fail(path, line_no, "malformed feature_ref: " + ref_field);
            }
        }
        auto& rec = out[image_id];
        if (rec.detections.empty()) {
            rec.size = size;
        } else if (rec.size.w != size.w || rec.size.h != size.h) {
            parse_fail(path, line_no, "inconsistent image size for " + image_id);
        }
        rec.detections.push_back(std::move(det));
    }
    return out;
}

void write_detections(const std::string& path, const DetectionSet& dets,
                      const Vocabulary& objects) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write detections file: " + path);
    full_precision(out);
    for (const auto& [image_id, rec] : dets) {
        for (const auto& d : rec.detections) {
            out << image_id << ' ' << rec.size.w << ' ' << rec.size.h << ' '
                << objects.name(d.label) << ' ' << d.score << ' ' << d.box.x_min << ' '
                << d.box.y_min << ' ' << d.box.x_max << ' ' << d.box.y_max << ' ';
            if (d.feature_ref) {
                out << *d.feature_ref;
            } else {
                out << '-';
            }
            out << '\n';
        }
    }
}

FeatureStore read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw std::runtime_error(path + ": bad feature file magic");
    }
    const std::uint32_t count = read_u32(in);
    const std::uint32_t dim = read_u32(in);
    if (!in) throw std::runtime_error(path + ": truncated feature header");
    if (dim == 0) throw std::runtime_error(path + ": feature dim must be positive");
    const std::size_t n = static_cast<std::size_t>(count) * dim;
    std::vector<float> values(n);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(in.gcount()) != n * 4) {
        throw std::runtime_error(path + ": truncated payload, expected " + std::to_string(n * 4) +
                                 " bytes");
    }
    return FeatureStore(dim, std::move(values));
}

void write_features(const std::string& path, const FeatureStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    out.write(kFeatureMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(store.count()));
    write_u32(out, static_cast<std::uint32_t>(store.dim()));
    for (std::uint32_t i = 0; i < store.count(); ++i) {
        auto row = store.row(i);
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * 4));
    }
}

GroundTruth read_gt(const std::string& path, const Vocabulary& objects,
                    const Vocabulary& predicates, const Vocabulary& attributes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ground-truth file: " + path);
    GroundTruth gt;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "rel") {
            GtRelationship r;
            if (!(fields >> r.image_id)) parse_fail(path, line_no, "missing image_id");
            r.subject_label = parse_label(fields, objects, path, line_no);
            r.subject_box = parse_box(fields, path, line_no);
            r.object_label = parse_label(fields, objects, path, line_no);
            r.object_box = parse_box(fields, path, line_no);
            r.predicate = parse_label(fields, predicates, path, line_no);
            if (r.predicate == 0) {
                parse_fail(path, line_no, "ground truth may not contain no_relationship");
            }
            gt.relationships.push_back(std::move(r));
        } else if (kind == "attr") {
            GtAttribute a;
            if (!(fields >> a.image_id)) parse_fail(path, line_no, "missing image_id");
            a.object_label = parse_label(fields, objects, path, line_no);
            a.object_box = parse_box(fields, path, line_no);
            a.attribute = parse_label(fields, attributes, path, line_no);
            gt.attributes.push_back(std::move(a));
        } else {
            parse_fail(path, line_no, "unknown record kind: " + kind);
        }
    }
    return gt;
}

void write_gt(const std::string& path, const GroundTruth& gt, const Vocabulary& objects,
              const Vocabulary& predicates, const Vocabulary& attributes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ground-truth file: " + path);
    full_precision(out);
    for (const auto& r : gt.relationships) {
        out << "rel " << r.image_id << ' ' << objects.name(r.subject_label) << ' '
            << r.subject_box.x_min << ' ' << r.subject_box.y_min << ' ' << r.subject_box.x_max
            << ' ' << r.subject_box.y_max << ' ' << objects.name(r.object_label) << ' '
            << r.object_box.x_min << ' ' << r.object_box.y_min << ' ' << r.object_box.x_max << ' '
            << r.object_box.y_max << ' ' << predicates.name(r.predicate) << '\n';
    }
    for (const auto& a : gt.attributes) {
        out << "attr " << a.image_id << ' ' << objects.name(a.object_label) << ' '
            << a.object_box.x_min << ' ' << a.object_box.y_min << ' ' << a.object_box.x_max << ' '
            << a.object_box.y_max << ' ' << attributes.name(a.attribute) << '\n';
    }
}

PairFeatureTable read_pair_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pair-feature file: " + path);
    PairFeatureTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string image_id;
        int i = 0;
        int j = 0;
        std::uint32_t ref = 0;
        if (!(fields >> image_id >> i >> j >> ref)) {
            parse_fail(path, line_no, "malformed pair-feature record");
        }
        if (i == j || i < 0 || j < 0) parse_fail(path, line_no, "invalid detection pair");
        table[{image_id, i, j}] = ref;
    }
    return table;
}

void write_pair_features(const std::string& path, const PairFeatureTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write pair-feature file: " + path);
    for (const auto& [key, ref] : table) {
        out << std::get<0>(key) << ' ' << std::get<1>(key) << ' ' << std::get<2>(key) << ' ' << ref
            << '\n';
    }
}

void validate_refs(const DetectionSet& dets, const PairFeatureTable& pairs,
                   const FeatureStore& store) {
    for (const auto& [image_id, rec] : dets) {
        for (const auto& d : rec.detections) {
            if (d.feature_ref && *d.feature_ref >= store.count()) {
                throw std::runtime_error("detection in " + image_id +
                                         " references missing feature row " +
                                         std::to_string(*d.feature_ref));
            }
        }
    }
    for (const auto& [key, ref] : pairs) {
        if (ref >= store.count()) {
            throw std::runtime_error("pair feature in " + std::get<0>(key) +
                                     " references missing feature row " + std::to_string(ref));
        }
    }
}

}  // namespace vrd
