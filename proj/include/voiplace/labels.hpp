#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace voiplace {

// Canonical tissue classes. Stored one byte per voxel.
enum class Label : uint8_t {
    NonBrain = 0,
    NormalBrain = 1,
    Periphery = 2,
    SolidTumor = 3,
    Necrosis = 4,
};

inline constexpr int kNumLabels = 5;

inline const char* label_name(Label l) {
    switch (l) {
        case Label::NonBrain: return "NonBrain";
        case Label::NormalBrain: return "NormalBrain";
        case Label::Periphery: return "Periphery";
        case Label::SolidTumor: return "SolidTumor";
        case Label::Necrosis: return "Necrosis";
    }
    return "?";
}

inline Label label_from_name(const std::string& s) {
    for (int i = 0; i < kNumLabels; ++i)
        if (s == label_name(static_cast<Label>(i))) return static_cast<Label>(i);
    throw std::runtime_error("unknown label name: " + s);
}

// Maps raw integer codes found in an input file to canonical labels.
// When split_zero_by_brain_mask is set, raw code 0 is resolved against a
// companion brain mask at load time (inside mask -> NormalBrain, outside ->
// NonBrain); without a mask every code-0 voxel becomes NonBrain and the
// loader emits a warning.
struct LabelMap {
    std::map<int, Label> codes;
    bool split_zero_by_brain_mask = false;

    // Identity map for files already carrying canonical labels.
    static LabelMap canonical() {
        LabelMap m;
        for (int i = 0; i < kNumLabels; ++i) m.codes[i] = static_cast<Label>(i);
        return m;
    }

    // BraTS 2021 convention: 1 = necrotic core, 2 = edema, 4 = enhancing tumor.
    // Code 0 is background and lacks a brain/non-brain split.
    static LabelMap brats() {
        LabelMap m;
        m.codes[0] = Label::NonBrain;
        m.codes[1] = Label::Necrosis;
        m.codes[2] = Label::Periphery;
        m.codes[4] = Label::SolidTumor;
        m.split_zero_by_brain_mask = true;
        return m;
    }
};

}  // namespace voiplace
