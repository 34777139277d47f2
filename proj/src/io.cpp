#include "edpred/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace edpred {

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_mvol_header(std::ofstream& f, const Dims3& d, const Spacing3& s, const char* dtype, const char* content) {
    json h;
    h["dims"] = {d.nx, d.ny, d.nz};
    h["spacing_mm"] = {s.x, s.y, s.z};
    h["dtype"] = dtype;
    h["content"] = content;
    const std::string line = h.dump();
    f.write(line.data(), static_cast<std::streamsize>(line.size()));
    f.put('\n');
}

struct MvolHeader {
    Dims3 dims;
    Spacing3 spacing;
    std::string dtype;
    std::string content;
};

MvolHeader parse_mvol_header(std::istream& f, const std::string& path) {
    std::string line;
    if (!std::getline(f, line)) throw FormatError("missing mvol header line in " + path);
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("malformed mvol header in " + path + ": " + e.what());
    }
    MvolHeader out;
    try {
        const auto& d = h.at("dims");
        const auto& s = h.at("spacing_mm");
        if (!d.is_array() || d.size() != 3 || !s.is_array() || s.size() != 3)
            throw FormatError("mvol dims/spacing must be 3-element arrays in " + path);
        out.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
        out.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
        out.dtype = h.at("dtype").get<std::string>();
        out.content = h.at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError("incomplete mvol header in " + path + ": " + e.what());
    }
    if (out.dtype != "f32" && out.dtype != "u8") throw FormatError("unknown mvol dtype '" + out.dtype + "' in " + path);
    if (out.content != "image" && out.content != "mask")
        throw FormatError("unknown mvol content '" + out.content + "' in " + path);
    if ((out.dtype == "f32") != (out.content == "image"))
        throw FormatError("mvol dtype/content mismatch in " + path + " (f32<->image, u8<->mask)");
    return out;
}

std::vector<char> read_rest(std::istream& f) {
    std::vector<char> bytes;
    char buf[1 << 16];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) bytes.insert(bytes.end(), buf, buf + f.gcount());
    return bytes;
}

}  // namespace

void write_mvol(const Volume3D& v, const std::string& path) {
    validate(v);
    auto f = open_out(path);
    write_mvol_header(f, v.dims, v.spacing_mm, "f32", "image");
    f.write(reinterpret_cast<const char*>(v.data.data()), static_cast<std::streamsize>(v.data.size() * sizeof(float)));
    if (!f) throw IoError("short write: " + path);
}

void write_mvol(const MaskVolume& m, const std::string& path) {
    validate(m);
    auto f = open_out(path);
    write_mvol_header(f, m.dims, m.spacing_mm, "u8", "mask");
    f.write(reinterpret_cast<const char*>(m.labels.data()), static_cast<std::streamsize>(m.labels.size()));
    if (!f) throw IoError("short write: " + path);
}

AnyVolume read_mvol(const std::string& path) {
    auto f = open_in(path);
    const MvolHeader h = parse_mvol_header(f, path);
    const std::vector<char> payload = read_rest(f);
    const std::size_t n = static_cast<std::size_t>(h.dims.nx) * h.dims.ny * h.dims.nz;
    if (h.dims.nx <= 0 || h.dims.ny <= 0 || h.dims.nz <= 0) throw SizeMismatchError("non-positive dims in " + path);
    if (h.dtype == "f32") {
        if (payload.size() != n * sizeof(float))
            throw SizeMismatchError("payload of " + path + " has " + std::to_string(payload.size()) + " bytes, expected " +
                                    std::to_string(n * sizeof(float)));
        Volume3D v;
        v.dims = h.dims;
        v.spacing_mm = h.spacing;
        v.data.resize(n);
        std::memcpy(v.data.data(), payload.data(), payload.size());
        validate(v);
        return v;
    }
    if (payload.size() != n)
        throw SizeMismatchError("payload of " + path + " has " + std::to_string(payload.size()) + " bytes, expected " +
                                std::to_string(n));
    MaskVolume m;
    m.dims = h.dims;
    m.spacing_mm = h.spacing;
    m.labels.assign(payload.begin(), payload.end());
    validate(m);
    return m;
}

// ---------------------------------------------------------------------------
// NIfTI-1 subset
// ---------------------------------------------------------------------------

AnyVolume read_nifti_subset(const std::string& path, NiftiContent content) {
    auto f = open_in(path);
    std::vector<char> bytes = read_rest(f);
    if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b)
        throw FormatError("compressed NIfTI not supported: " + path);
    if (bytes.size() < 352) throw FormatError("file too small for a NIfTI-1 header: " + path);

    auto rd_i32 = [&](std::size_t off) { std::int32_t v; std::memcpy(&v, bytes.data() + off, 4); return v; };
    auto rd_i16 = [&](std::size_t off) { std::int16_t v; std::memcpy(&v, bytes.data() + off, 2); return v; };
    auto rd_f32 = [&](std::size_t off) { float v; std::memcpy(&v, bytes.data() + off, 4); return v; };

    if (rd_i32(0) != 348) throw FormatError("bad sizeof_hdr (not little-endian NIfTI-1?): " + path);
    char magic[4];
    std::memcpy(magic, bytes.data() + 344, 4);
    if (std::memcmp(magic, "n+1", 4) != 0) throw FormatError("magic mismatch (need single-file 'n+1'): " + path);

    const int ndim = rd_i16(40);
    if (ndim < 2 || ndim > 3) throw FormatError("only 2D/3D NIfTI supported, dim[0]=" + std::to_string(ndim));
    Dims3 dims{rd_i16(42), rd_i16(44), ndim >= 3 ? rd_i16(46) : 1};
    Spacing3 spacing{rd_f32(80), rd_f32(84), ndim >= 3 ? rd_f32(88) : 1.0f};
    const int datatype = rd_i16(70);
    const float slope = rd_f32(112);
    const float inter = rd_f32(116);
    if (!(slope == 0.0f || slope == 1.0f) || inter != 0.0f)
        throw FormatError("scaled NIfTI (scl_slope/scl_inter) not supported: " + path);
    const auto vox_offset = static_cast<std::size_t>(rd_f32(108));
    if (vox_offset < 352 || vox_offset > bytes.size()) throw FormatError("bad vox_offset in " + path);

    const std::size_t n = static_cast<std::size_t>(dims.nx) * dims.ny * dims.nz;
    std::size_t elem = 0;
    switch (datatype) {
        case 2: elem = 1; break;   // uint8
        case 4: elem = 2; break;   // int16
        case 16: elem = 4; break;  // float32
        default: throw FormatError("unsupported NIfTI datatype " + std::to_string(datatype) + ": " + path);
    }
    if (bytes.size() - vox_offset < n * elem)
        throw SizeMismatchError("NIfTI payload shorter than dims declare: " + path);
    const char* src = bytes.data() + vox_offset;

    auto to_f32 = [&](std::size_t i) -> float {
        switch (datatype) {
            case 2: return static_cast<float>(static_cast<unsigned char>(src[i]));
            case 4: { std::int16_t v; std::memcpy(&v, src + 2 * i, 2); return static_cast<float>(v); }
            default: { float v; std::memcpy(&v, src + 4 * i, 4); return v; }
        }
    };

    if (content == NiftiContent::image) {
        Volume3D v;
        v.dims = dims;
        v.spacing_mm = spacing;
        v.data.resize(n);
        for (std::size_t i = 0; i < n; ++i) v.data[i] = to_f32(i);
        validate(v);
        return v;
    }
    MaskVolume m;
    m.dims = dims;
    m.spacing_mm = spacing;
    m.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = to_f32(i);
        if (v != 0.0f && v != 1.0f && v != 2.0f)
            throw InvalidLabelError("mask voxel value " + std::to_string(v) + " not a label in {0,1,2}: " + path);
        m.labels[i] = static_cast<std::uint8_t>(v);
    }
    validate(m);
    return m;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const std::vector<std::string> kClinicalColumns = {
    "patient_id", "age", "height_cm", "weight_kg", "smoking_status", "smoking_freq",
    "alcohol_use", "alcohol_units_week", "medication", "comorbidities", "preop_iief_q1"};
const std::vector<std::string> kLabelColumns = {"patient_id", "iief_q1_12mo"};

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& want, const std::string& path) {
    if (got != want) {
        std::string g;
        for (const auto& c : got) g += c + ",";
        throw SchemaError("unexpected CSV header in " + path + ": got '" + g + "'");
    }
}

double parse_num(const std::string& s, const std::string& col, const std::string& path) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (...) {
        throw SchemaError("non-numeric value '" + s + "' in column " + col + " of " + path);
    }
    if (pos != s.size()) throw SchemaError("non-numeric value '" + s + "' in column " + col + " of " + path);
    return v;
}

std::string check_category(const std::string& s, const std::set<std::string>& allowed, const std::string& col,
                           const std::string& path) {
    if (!allowed.count(s)) throw SchemaError("unknown category '" + s + "' in column " + col + " of " + path);
    return s;
}

}  // namespace

int binarize_outcome(int score) {
    if (score < 0 || score > 5) throw SchemaError("IIEF Q1 score " + std::to_string(score) + " outside 0..5");
    return score >= 4 ? 1 : 0;
}

std::vector<ClinicalRecord> read_clinical_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw SchemaError("empty clinical CSV: " + path);
    check_header(split_csv_line(line), kClinicalColumns, path);
    std::vector<ClinicalRecord> out;
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != kClinicalColumns.size())
            throw SchemaError("row with " + std::to_string(cells.size()) + " cells in " + path);
        ClinicalRecord r;
        r.patient_id = cells[0];
        auto num = [&](int i) -> std::optional<double> {
            if (cells[i].empty()) return std::nullopt;
            return parse_num(cells[i], kClinicalColumns[i], path);
        };
        auto cat = [&](int i, const std::set<std::string>& allowed) -> std::optional<std::string> {
            if (cells[i].empty()) return std::nullopt;
            return check_category(cells[i], allowed, kClinicalColumns[i], path);
        };
        r.age = num(1);
        r.height_cm = num(2);
        r.weight_kg = num(3);
        r.smoking_status = cat(4, {"never", "former", "current"});
        r.smoking_freq = num(5);
        r.alcohol_use = cat(6, {"no", "yes"});
        r.alcohol_units_week = num(7);
        r.medication = cat(8, {"no", "yes"});
        r.comorbidities = cat(9, {"no", "yes"});
        if (!cells[10].empty()) {
            const double v = parse_num(cells[10], "preop_iief_q1", path);
            const int s = static_cast<int>(v);
            if (v != s || s < 0 || s > 5) throw SchemaError("preop_iief_q1 '" + cells[10] + "' outside 0..5 in " + path);
            r.preop_iief_q1 = s;
        }
        if ((r.age && *r.age <= 0) || (r.height_cm && *r.height_cm <= 0) || (r.weight_kg && *r.weight_kg <= 0))
            throw SchemaError("non-positive age/height/weight for patient " + r.patient_id + " in " + path);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<OutcomeLabel> read_labels_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw SchemaError("empty labels CSV: " + path);
    check_header(split_csv_line(line), kLabelColumns, path);
    std::vector<OutcomeLabel> out;
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != kLabelColumns.size())
            throw SchemaError("row with " + std::to_string(cells.size()) + " cells in " + path);
        OutcomeLabel l;
        l.patient_id = cells[0];
        const double v = parse_num(cells[1], "iief_q1_12mo", path);
        const int s = static_cast<int>(v);
        if (v != s) throw SchemaError("iief_q1_12mo '" + cells[1] + "' is not an integer in " + path);
        l.iief_q1_12mo = s;
        l.binary = binarize_outcome(s);
        out.push_back(std::move(l));
    }
    return out;
}

void write_clinical_csv(const std::vector<ClinicalRecord>& records, const std::string& path) {
    auto f = open_out(path);
    for (std::size_t i = 0; i < kClinicalColumns.size(); ++i) f << (i ? "," : "") << kClinicalColumns[i];
    f << "\n";
    auto num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto cat = [](const std::optional<std::string>& v) { return v ? *v : std::string(); };
    for (const auto& r : records) {
        f << r.patient_id << "," << num(r.age) << "," << num(r.height_cm) << "," << num(r.weight_kg) << ","
          << cat(r.smoking_status) << "," << num(r.smoking_freq) << "," << cat(r.alcohol_use) << ","
          << num(r.alcohol_units_week) << "," << cat(r.medication) << "," << cat(r.comorbidities) << ","
          << (r.preop_iief_q1 ? std::to_string(*r.preop_iief_q1) : std::string()) << "\n";
    }
}

void write_labels_csv(const std::vector<OutcomeLabel>& labels, const std::string& path) {
    auto f = open_out(path);
    f << "patient_id,iief_q1_12mo\n";
    for (const auto& l : labels) f << l.patient_id << "," << l.iief_q1_12mo << "\n";
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

bool is_complete(const ClinicalRecord& r) {
    return r.age && r.height_cm && r.weight_kg && r.smoking_status && r.smoking_freq && r.alcohol_use &&
           r.alcohol_units_week && r.medication && r.comorbidities && r.preop_iief_q1;
}

std::vector<ClinicalRecord> drop_incomplete(const std::vector<ClinicalRecord>& records) {
    std::vector<ClinicalRecord> out;
    for (const auto& r : records)
        if (is_complete(r)) out.push_back(r);
    return out;
}

namespace {

template <class Get, class Set>
void impute_numeric(std::vector<ClinicalRecord>& rs, const std::string& col, Get get, Set set, ImputationSummary& sum) {
    double total = 0.0;
    int present = 0, missing = 0;
    for (const auto& r : rs) {
        if (auto v = get(r)) {
            total += *v;
            ++present;
        } else {
            ++missing;
        }
    }
    if (missing == 0) return;
    if (present == 0) throw ImputeError("column '" + col + "' is entirely missing and cannot be imputed");
    const double mean = total / present;
    for (auto& r : rs)
        if (!get(r)) set(r, mean);
    sum.columns[col] = {format_double(mean), missing};
}

template <class Get, class Set>
void impute_categorical(std::vector<ClinicalRecord>& rs, const std::string& col, Get get, Set set,
                        ImputationSummary& sum) {
    std::map<std::string, int> counts;  // ordered: ties resolve to the smallest key
    int missing = 0;
    for (const auto& r : rs) {
        if (auto v = get(r))
            ++counts[*v];
        else
            ++missing;
    }
    if (missing == 0) return;
    if (counts.empty()) throw ImputeError("column '" + col + "' is entirely missing and cannot be imputed");
    std::string mode;
    int best = -1;
    for (const auto& [k, c] : counts) {
        if (c > best) {
            best = c;
            mode = k;
        }
    }
    for (auto& r : rs)
        if (!get(r)) set(r, mode);
    sum.columns[col] = {mode, missing};
}

}  // namespace

std::pair<std::vector<ClinicalRecord>, ImputationSummary> impute_clinical(const std::vector<ClinicalRecord>& records) {
    std::vector<ClinicalRecord> rs = records;
    ImputationSummary sum;
    impute_numeric(rs, "age", [](const ClinicalRecord& r) { return r.age; },
                   [](ClinicalRecord& r, double v) { r.age = v; }, sum);
    impute_numeric(rs, "height_cm", [](const ClinicalRecord& r) { return r.height_cm; },
                   [](ClinicalRecord& r, double v) { r.height_cm = v; }, sum);
    impute_numeric(rs, "weight_kg", [](const ClinicalRecord& r) { return r.weight_kg; },
                   [](ClinicalRecord& r, double v) { r.weight_kg = v; }, sum);
    impute_categorical(rs, "smoking_status", [](const ClinicalRecord& r) { return r.smoking_status; },
                       [](ClinicalRecord& r, const std::string& v) { r.smoking_status = v; }, sum);
    impute_numeric(rs, "smoking_freq", [](const ClinicalRecord& r) { return r.smoking_freq; },
                   [](ClinicalRecord& r, double v) { r.smoking_freq = v; }, sum);
    impute_categorical(rs, "alcohol_use", [](const ClinicalRecord& r) { return r.alcohol_use; },
                       [](ClinicalRecord& r, const std::string& v) { r.alcohol_use = v; }, sum);
    impute_numeric(rs, "alcohol_units_week", [](const ClinicalRecord& r) { return r.alcohol_units_week; },
                   [](ClinicalRecord& r, double v) { r.alcohol_units_week = v; }, sum);
    impute_categorical(rs, "medication", [](const ClinicalRecord& r) { return r.medication; },
                       [](ClinicalRecord& r, const std::string& v) { r.medication = v; }, sum);
    impute_categorical(rs, "comorbidities", [](const ClinicalRecord& r) { return r.comorbidities; },
                       [](ClinicalRecord& r, const std::string& v) { r.comorbidities = v; }, sum);
    // preop score is integer-valued; impute with the rounded mean so the
    // 0..5 invariant survives.
    {
        double total = 0.0;
        int present = 0, missing = 0;
        for (const auto& r : rs) {
            if (r.preop_iief_q1) {
                total += *r.preop_iief_q1;
                ++present;
            } else {
                ++missing;
            }
        }
        if (missing > 0) {
            if (present == 0) throw ImputeError("column 'preop_iief_q1' is entirely missing and cannot be imputed");
            const int fill = static_cast<int>(std::lround(total / present));
            for (auto& r : rs)
                if (!r.preop_iief_q1) r.preop_iief_q1 = fill;
            sum.columns["preop_iief_q1"] = {std::to_string(fill), missing};
        }
    }
    return {std::move(rs), std::move(sum)};
}

// ---------------------------------------------------------------------------
// features.csv
// ---------------------------------------------------------------------------

FeatureTable read_features_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw SchemaError("empty features CSV: " + path);
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "patient_id")
        throw SchemaError("features CSV must start with patient_id: " + path);
    FeatureTable t;
    t.columns.assign(header.begin() + 1, header.end());
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw SchemaError("row with " + std::to_string(cells.size()) + " cells in " + path);
        t.ids.push_back(cells[0]);
        std::vector<double> row(t.columns.size());
        for (std::size_t i = 0; i < t.columns.size(); ++i) row[i] = parse_num(cells[i + 1], t.columns[i], path);
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_features_csv(const FeatureTable& table, const std::string& path) {
    auto f = open_out(path);
    f << "patient_id";
    for (const auto& c : table.columns) f << "," << c;
    f << "\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        f << table.ids[r];
        for (double v : table.rows[r]) f << "," << format_double(v);
        f << "\n";
    }
}

}  // namespace edpred
