#pragma once
// The 50 ranked solutions reported for neuron 5 (Case I) of the reference
// run, transcribed verbatim, and the concept list they reduce to.

#include <array>
#include <string_view>

namespace clens::testing {

inline constexpr std::array<std::string_view, 50> kNeuron5Solutions = {
    "∃ :imageContains.(:WN_Table)",
    "∃ :imageContains.(:Floor)",
    "∃ :imageContains.(:WN_Floor)",
    "∃ :imageContains.(:WN_Flooring)",
    "∃ :imageContains.(:Window)",
    "∃ :imageContains.(:WN_Window)",
    "∃ :imageContains.((:WN_Flooring) ⊓ (:Window))",
    "∃ :imageContains.((:Window) ⊓ (:Floor))",
    "∃ :imageContains.((:WN_Flooring) ⊓ (:Floor))",
    "∃ :imageContains.((:Ceiling) ⊓ (:WN_Table))",
    "∃ :imageContains.(:Ceiling)",
    "∃ :imageContains.(:WN_Ceiling)",
    "∃ :imageContains.(:WN_Windowpane)",
    "∃ :imageContains.(:WN_Leg)",
    "∃ :imageContains.(:Picture)",
    "∃ :imageContains.(:WN_Painting)",
    "∃ :imageContains.(:WN_Picture)",
    "∃ :imageContains.(:Leg)",
    "∃ :imageContains.((:WN_Table) ⊓ (:Leg))",
    "∃ :imageContains.((:WN_Painting) ⊓ (:WN_Ceiling))",
    "∃ :imageContains.((:WN_Leg) ⊓ (:WN_Window))",
    "∃ :imageContains.(:Chair)",
    "∃ :imageContains.(:WN_Chair)",
    "∃ :imageContains.(:WN_Lamp)",
    "∃ :imageContains.((:WN_Lamp) ⊓ (:WN_Floor))",
    "∃ :imageContains.((:WN_Windowpane) ⊓ (:WN_Painting))",
    "∃ :imageContains.(:Back)",
    "∃ :imageContains.(:WN_Back)",
    "∃ :imageContains.((:Back) ⊓ (:WN_Flooring))",
    "∃ :imageContains.((:WN_Floor) ⊓ (:WN_Back))",
    "∃ :imageContains.((:WN_Windowpane) ⊓ (:WN_Ceiling))",
    "∃ :imageContains.((:Ceiling) ⊓ (:Leg))",
    "∃ :imageContains.((:Floor) ⊓ (:Table))",
    "∃ :imageContains.(:Table)",
    "∃ :imageContains.((:WN_Back) ⊓ (:WN_Windowpane))",
    "∃ :imageContains.((:Chair) ⊓ (:Ceiling))",
    "∃ :imageContains.(:Arm)",
    "∃ :imageContains.(:WN_Arm)",
    "∃ :imageContains.((:WN_Window) ⊓ (:WN_Lamp))",
    "∃ :imageContains.((:Back) ⊓ (:Window))",
    "∃ :imageContains.((:WN_Floor) ⊓ (:WN_Windowpane))",
    "∃ :imageContains.((:Back) ⊓ (:Floor))",
    "∃ :imageContains.((:WN_Window) ⊓ (:WN_Floor))",
    "∃ :imageContains.((:Chair) ⊓ (:WN_Table))",
    "∃ :imageContains.(:Top)",
    "∃ :imageContains.(:WN_Top)",
    "∃ :imageContains.((:Table) ⊓ (:WN_Chair))",
    "∃ :imageContains.((:Floor) ⊓ (:WN_Chair))",
    "∃ :imageContains.((:Leg) ⊓ (:Picture))",
    "∃ :imageContains.(:WN_Cabinet)",
};

inline constexpr std::array<std::string_view, 15> kNeuron5Concepts = {
    "arm", "back", "cabinet", "ceiling", "chair", "floor", "flooring", "lamp",
    "leg", "painting", "picture", "table", "top", "window", "windowpane",
};

/// Every raw class spelling used above, for building a hierarchy to parse into.
inline constexpr std::array<std::string_view, 30> kNeuron5Labels = {
    "WN_Table", "Table", "Floor", "WN_Floor", "WN_Flooring", "Window", "WN_Window", "Ceiling",
    "WN_Ceiling", "WN_Windowpane", "WN_Leg", "Leg", "Picture", "WN_Picture", "WN_Painting",
    "Chair", "WN_Chair", "WN_Lamp", "Back", "WN_Back", "Arm", "WN_Arm", "Top", "WN_Top",
    "WN_Cabinet", "Cabinet", "Lamp", "Painting", "Windowpane", "Flooring",
};

}  // namespace clens::testing
