/** Slider panel grouping of the 18 score features. */

export interface FeatureGroup {
    label: string;
    indices: number[];
}

const GROUP_ORDER: [string, string[]][] = [
    ["Pitch", ["pitch", "pitch_sq"]],
    ["Rhythm & Meter", ["duration", "ioi_prev", "ioi_next", "downbeat", "beat_phase"]],
    [
        "Dynamics markings",
        ["dyn_pp", "dyn_p", "dyn_mp", "dyn_mf", "dyn_f", "dyn_ff", "crescendo", "diminuendo"],
    ],
    ["Articulation marks", ["slur", "accent", "fermata"]],
];

export function groupFeatures(featureNames: string[]): FeatureGroup[] {
    const groups: FeatureGroup[] = [];
    const used = new Set<number>();
    for (const [label, members] of GROUP_ORDER) {
        const indices = members
            .map((name) => featureNames.indexOf(name))
            .filter((i) => i >= 0);
        indices.forEach((i) => used.add(i));
        if (indices.length > 0) groups.push({ label, indices });
    }
    const rest = featureNames.map((_, i) => i).filter((i) => !used.has(i));
    if (rest.length > 0) groups.push({ label: "Other", indices: rest });
    return groups;
}
