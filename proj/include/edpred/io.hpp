#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edpred/volume.hpp"

namespace edpred {

// ---------------------------------------------------------------------------
// .mvol: one UTF-8 JSON header line
//   {"dims":[nx,ny,nz],"spacing_mm":[sx,sy,sz],"dtype":"f32"|"u8","content":"image"|"mask"}
// terminated by '\n', followed by the raw little-endian payload, x-fastest.
// ---------------------------------------------------------------------------

using AnyVolume = std::variant<Volume3D, MaskVolume>;

AnyVolume read_mvol(const std::string& path);
void write_mvol(const Volume3D& v, const std::string& path);
void write_mvol(const MaskVolume& m, const std::string& path);

// Strict NIfTI-1 subset: uncompressed, little-endian, single-file ("n+1"),
// datatype uint8/int16/float32, scl_slope in {0,1}, scl_inter 0.
enum class NiftiContent { image, mask };
AnyVolume read_nifti_subset(const std::string& path, NiftiContent content);

// ---------------------------------------------------------------------------
// Clinical records and outcome labels
// ---------------------------------------------------------------------------

struct ClinicalRecord {
    std::string patient_id;
    std::optional<double> age;
    std::optional<double> height_cm;
    std::optional<double> weight_kg;
    std::optional<std::string> smoking_status;  // never | former | current
    std::optional<double> smoking_freq;         // units/day
    std::optional<std::string> alcohol_use;     // no | yes
    std::optional<double> alcohol_units_week;
    std::optional<std::string> medication;      // no | yes
    std::optional<std::string> comorbidities;   // no | yes
    std::optional<int> preop_iief_q1;           // 0..5
};

struct OutcomeLabel {
    std::string patient_id;
    int iief_q1_12mo = 0;  // 0..5
    int binary = 0;        // 1 iff score >= 4
};

// Fixed canonical column order; readers reject any other header.
extern const std::vector<std::string> kClinicalColumns;
extern const std::vector<std::string> kLabelColumns;

std::vector<ClinicalRecord> read_clinical_csv(const std::string& path);
std::vector<OutcomeLabel> read_labels_csv(const std::string& path);
void write_clinical_csv(const std::vector<ClinicalRecord>& records, const std::string& path);
void write_labels_csv(const std::vector<OutcomeLabel>& labels, const std::string& path);

int binarize_outcome(int score);

struct ImputationSummary {
    struct Column {
        std::string fill_value;  // printable form of the value used
        int filled = 0;
    };
    std::map<std::string, Column> columns;  // only columns that had gaps
};

// Numeric columns -> mean of present values; categorical -> mode, ties broken
// by the lexicographically smallest category.
std::pair<std::vector<ClinicalRecord>, ImputationSummary> impute_clinical(const std::vector<ClinicalRecord>& records);

// Strict alternative to imputation: keep only complete records.
std::vector<ClinicalRecord> drop_incomplete(const std::vector<ClinicalRecord>& records);

bool is_complete(const ClinicalRecord& r);

// ---------------------------------------------------------------------------
// features.csv: patient_id plus named numeric feature columns
// ---------------------------------------------------------------------------

struct FeatureTable {
    std::vector<std::string> columns;  // feature names, excluding patient_id
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
};

FeatureTable read_features_csv(const std::string& path);
void write_features_csv(const FeatureTable& table, const std::string& path);

}  // namespace edpred
