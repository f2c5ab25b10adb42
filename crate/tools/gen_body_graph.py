#!/usr/bin/env python3
"""Generate the bundled simplified-body vessel graph and the 20-anchor layout.

Body frame (metres): x lateral (+ = patient's left), y cranial, z anterior.
The patient lies supine, anterior skin at z = 0, gravity along -z.
Flow speeds follow vessel class: aorta 0.20, arteries 0.10, veins 0.02-0.04,
organ transitions 0.05 m/s.

Usage: gen_body_graph.py <graph.json> <anchors.json>
"""
import json
import sys

AORTA, ARTERY, TRANSIT = 0.20, 0.10, 0.05
VEIN_SMALL, VEIN, VENA_CAVA = 0.02, 0.03, 0.04

nodes = {
    # heart and lungs
    "RA": (-0.030, 0.280, -0.070), "RV": (0.000, 0.255, -0.050),
    "PT": (0.010, 0.320, -0.050), "RPA": (-0.050, 0.340, -0.060), "LPA": (0.060, 0.340, -0.060),
    "RL1": (-0.100, 0.370, -0.070), "RL2": (-0.115, 0.300, -0.070), "RPV": (-0.060, 0.300, -0.085),
    "LL1": (0.100, 0.370, -0.070), "LL2": (0.115, 0.300, -0.070), "LPV": (0.060, 0.300, -0.085),
    "LA": (0.010, 0.310, -0.090), "LV": (0.040, 0.255, -0.070), "AoRoot": (0.020, 0.300, -0.060),
    "AoArch": (0.000, 0.400, -0.050), "AoArch2": (0.030, 0.410, -0.060),
    # head and neck
    "Brachio": (-0.030, 0.450, -0.040), "RNeck": (-0.030, 0.550, -0.020), "LNeck": (0.030, 0.550, -0.020),
    "RHead": (-0.040, 0.680, -0.050), "LHead": (0.040, 0.680, -0.050), "Crown": (0.000, 0.780, -0.060),
    "JugRtop": (-0.045, 0.640, -0.030), "JugLtop": (0.045, 0.640, -0.030),
    "JugRlow": (-0.045, 0.480, -0.020), "JugLlow": (0.045, 0.480, -0.020), "SVC": (-0.030, 0.420, -0.050),
    # descending aorta, abdomen
    "DescAo": (0.020, 0.200, -0.095), "Celiac": (0.020, 0.100, -0.090),
    "GutIn": (0.000, 0.040, -0.050), "GutOut": (-0.040, 0.000, -0.040), "Portal": (-0.060, 0.120, -0.060),
    "Liver": (-0.070, 0.170, -0.060),
    "KidL": (0.085, 0.070, -0.110), "KidLout": (0.090, 0.030, -0.110),
    "KidR": (-0.085, 0.070, -0.110), "KidRout": (-0.090, 0.030, -0.110),
    "Bifurc": (0.010, -0.050, -0.090),
    "IVCbif": (-0.010, -0.050, -0.090), "IVCren": (-0.020, 0.060, -0.100), "IVCmid": (-0.020, 0.180, -0.090),
}


def limb(side, sgn):
    """Arm and leg node coordinates for one side (sgn = +1 left, -1 right)."""
    s = sgn
    return {
        f"{side}Sub": (s * 0.080, 0.450, -0.040), f"{side}Ax": (s * 0.180, 0.470, -0.020),
        f"{side}BrTop": (s * 0.250, 0.420, -0.010), f"{side}Elbow": (s * 0.280, 0.180, -0.006),
        f"{side}Wrist": (s * 0.300, -0.050, -0.004), f"{side}Hand": (s * 0.310, -0.150, -0.004),
        f"{side}VWrist": (s * 0.290, -0.050, -0.004), f"{side}VElbow": (s * 0.270, 0.180, -0.004),
        f"{side}VAx": (s * 0.200, 0.460, -0.020), f"{side}VSub": (s * 0.080, 0.440, -0.040),
        f"{side}Iliac": (s * 0.080, -0.120, -0.060), f"{side}Fem": (s * 0.100, -0.250, -0.020),
        f"{side}Knee": (s * 0.100, -0.500, -0.010), f"{side}Ankle": (s * 0.100, -0.850, -0.006),
        f"{side}Foot": (s * 0.110, -0.930, -0.005), f"{side}VAnkle": (s * 0.090, -0.850, -0.005),
        f"{side}VKnee": (s * 0.090, -0.500, -0.006), f"{side}VFem": (s * 0.090, -0.250, -0.015),
        f"{side}VIliac": (s * 0.070, -0.120, -0.060),
    }


nodes.update(limb("L", 1))
nodes.update(limb("R", -1))

# (from, to, kind, speed, name)
edges = [
    ("RA", "RV", "organ_transition", TRANSIT, "right heart"),
    ("RV", "PT", "artery", ARTERY, "pulmonary trunk"),
    ("PT", "RPA", "artery", ARTERY, "right pulmonary artery"),
    ("PT", "LPA", "artery", ARTERY, "left pulmonary artery"),
    ("RPA", "RL1", "organ_transition", TRANSIT, "right lung upper"),
    ("RL1", "RL2", "organ_transition", TRANSIT, "right lung lower"),
    ("RL2", "RPV", "vein", VEIN, "right pulmonary vein"),
    ("RPV", "LA", "vein", VEIN, "right pulmonary vein trunk"),
    ("LPA", "LL1", "organ_transition", TRANSIT, "left lung upper"),
    ("LL1", "LL2", "organ_transition", TRANSIT, "left lung lower"),
    ("LL2", "LPV", "vein", VEIN, "left pulmonary vein"),
    ("LPV", "LA", "vein", VEIN, "left pulmonary vein trunk"),
    ("LA", "LV", "organ_transition", TRANSIT, "left heart"),
    ("LV", "AoRoot", "artery", AORTA, "aortic root"),
    ("AoRoot", "AoArch", "artery", AORTA, "ascending aorta"),
    ("AoArch", "AoArch2", "artery", AORTA, "aortic arch"),
    ("AoArch", "Brachio", "artery", ARTERY, "brachiocephalic trunk"),
    ("Brachio", "RNeck", "artery", ARTERY, "right common carotid"),
    ("Brachio", "RSub", "artery", ARTERY, "right subclavian artery"),
    ("AoArch2", "LNeck", "artery", ARTERY, "left common carotid"),
    ("AoArch2", "LSub", "artery", ARTERY, "left subclavian artery"),
    ("AoArch2", "DescAo", "artery", AORTA, "thoracic aorta"),
    ("RNeck", "RHead", "artery", ARTERY, "right internal carotid"),
    ("LNeck", "LHead", "artery", ARTERY, "left internal carotid"),
    ("RHead", "Crown", "organ_transition", TRANSIT, "right cerebral bed"),
    ("LHead", "Crown", "organ_transition", TRANSIT, "left cerebral bed"),
    ("Crown", "JugRtop", "vein", VEIN_SMALL, "right cerebral sinus"),
    ("Crown", "JugLtop", "vein", VEIN_SMALL, "left cerebral sinus"),
    ("JugRtop", "JugRlow", "vein", VEIN, "right jugular vein"),
    ("JugLtop", "JugLlow", "vein", VEIN, "left jugular vein"),
    ("JugRlow", "SVC", "vein", VEIN, "right brachiocephalic vein"),
    ("JugLlow", "SVC", "vein", VEIN, "left brachiocephalic vein"),
    ("SVC", "RA", "vein", VENA_CAVA, "superior vena cava"),
    ("DescAo", "Celiac", "artery", AORTA, "abdominal aorta upper"),
    ("Celiac", "GutIn", "artery", ARTERY, "mesenteric artery"),
    ("GutIn", "GutOut", "organ_transition", TRANSIT, "intestinal bed"),
    ("GutOut", "Portal", "vein", VEIN, "portal vein"),
    ("Portal", "Liver", "organ_transition", TRANSIT, "hepatic bed"),
    ("Liver", "IVCmid", "vein", VENA_CAVA, "hepatic vein"),
    ("Celiac", "KidL", "artery", ARTERY, "left renal artery"),
    ("KidL", "KidLout", "organ_transition", TRANSIT, "left renal bed"),
    ("KidLout", "IVCren", "vein", VEIN, "left renal vein"),
    ("Celiac", "KidR", "artery", ARTERY, "right renal artery"),
    ("KidR", "KidRout", "organ_transition", TRANSIT, "right renal bed"),
    ("KidRout", "IVCren", "vein", VEIN, "right renal vein"),
    ("Celiac", "Bifurc", "artery", AORTA, "abdominal aorta lower"),
    ("IVCbif", "IVCren", "vein", VENA_CAVA, "inferior vena cava lower"),
    ("IVCren", "IVCmid", "vein", VENA_CAVA, "inferior vena cava middle"),
    ("IVCmid", "RA", "vein", VENA_CAVA, "inferior vena cava upper"),
]

for side, name in (("L", "left"), ("R", "right")):
    sub_from = "AoArch2" if side == "L" else "Brachio"
    edges += [
        (f"{side}Sub", f"{side}Ax", "artery", ARTERY, f"{name} axillary artery"),
        (f"{side}Ax", f"{side}BrTop", "artery", ARTERY, f"{name} brachial artery upper"),
        (f"{side}BrTop", f"{side}Elbow", "artery", ARTERY, f"{name} brachial artery"),
        (f"{side}Elbow", f"{side}Wrist", "artery", ARTERY, f"{name} radial artery"),
        (f"{side}Wrist", f"{side}Hand", "organ_transition", TRANSIT, f"{name} hand bed"),
        (f"{side}Hand", f"{side}VWrist", "vein", VEIN_SMALL, f"{name} hand veins"),
        (f"{side}VWrist", f"{side}VElbow", "vein", VEIN, f"{name} forearm vein"),
        (f"{side}VElbow", f"{side}VAx", "vein", VEIN, f"{name} basilic vein"),
        (f"{side}VAx", f"{side}VSub", "vein", VEIN, f"{name} subclavian vein"),
        (f"{side}VSub", "SVC", "vein", VENA_CAVA, f"{name} brachiocephalic vein lower"),
        ("Bifurc", f"{side}Iliac", "artery", ARTERY, f"{name} common iliac artery"),
        (f"{side}Iliac", f"{side}Fem", "artery", ARTERY, f"{name} external iliac artery"),
        (f"{side}Fem", f"{side}Knee", "artery", ARTERY, f"{name} femoral artery"),
        (f"{side}Knee", f"{side}Ankle", "artery", ARTERY, f"{name} tibial artery"),
        (f"{side}Ankle", f"{side}Foot", "organ_transition", TRANSIT, f"{name} foot bed"),
        (f"{side}Foot", f"{side}VAnkle", "vein", VEIN_SMALL, f"{name} foot veins"),
        (f"{side}VAnkle", f"{side}VKnee", "vein", VEIN, f"{name} tibial vein"),
        (f"{side}VKnee", f"{side}VFem", "vein", VEIN, f"{name} femoral vein"),
        (f"{side}VFem", f"{side}VIliac", "vein", VEIN, f"{name} external iliac vein"),
        (f"{side}VIliac", "IVCbif", "vein", VENA_CAVA, f"{name} common iliac vein"),
    ]

# Outgoing branch weights per node (cardiac-output style split); nodes with
# one outgoing edge get probability 1.
weights = {
    "PT": {"RPA": 0.5, "LPA": 0.5},
    "AoArch": {"AoArch2": 0.82, "Brachio": 0.18},
    "Brachio": {"RNeck": 0.5, "RSub": 0.5},
    "AoArch2": {"LNeck": 0.11, "LSub": 0.09, "DescAo": 0.80},
    "Crown": {"JugRtop": 0.5, "JugLtop": 0.5},
    "Celiac": {"GutIn": 0.30, "KidL": 0.15, "KidR": 0.15, "Bifurc": 0.40},
    "Bifurc": {"LIliac": 0.5, "RIliac": 0.5},
}

REGION = {}


def region_of(name):
    n = name
    if any(k in n for k in ("heart", "pulmonary", "lung", "aortic", "ascending", "vena cava upper", "superior")):
        return "heart_lung"
    if any(k in n for k in ("carotid", "cerebral", "jugular", "brachiocephalic vein", "brachiocephalic trunk")):
        return "head_neck"
    if any(k in n for k in ("axillary", "brachial", "radial", "hand", "forearm", "basilic", "subclavian")):
        return "arm"
    if any(k in n for k in ("femoral", "tibial", "foot", "external iliac")):
        return "leg"
    return "abdomen"


def build():
    segs = []
    by_from = {}
    for i, (a, b, kind, speed, name) in enumerate(edges):
        segs.append({
            "id": i + 1,
            "name": name,
            "region": region_of(name),
            "kind": kind,
            "start_xyz_m": list(nodes[a]),
            "end_xyz_m": list(nodes[b]),
            "flow_speed_mps": speed,
            "downstream": [],
            "_from": a,
            "_to": b,
        })
        by_from.setdefault(a, []).append(segs[-1])
    for s in segs:
        outs = by_from[s["_to"]]
        w = weights.get(s["_to"])
        if w is None:
            assert len(outs) == 1, s["_to"]
            s["downstream"] = [{"id": outs[0]["id"], "p": 1.0}]
        else:
            assert sorted(w) == sorted(o["_to"] for o in outs), s["_to"]
            s["downstream"] = [{"id": o["id"], "p": w[o["_to"]]} for o in outs]
    inject = [s["id"] for s in segs if s["name"] == "left brachial artery"]
    for s in segs:
        del s["_from"], s["_to"]
    return {"name": "simplified_body", "segments": segs, "injection_points": inject}


# 20 anchors: 12 over torso/head, 8 over the limbs.
ANCHORS = [
    ("heart", (0.010, 0.280)), ("right lung", (-0.105, 0.335)), ("left lung", (0.105, 0.335)),
    ("aortic arch", (0.000, 0.420)), ("right neck", (-0.040, 0.560)), ("left neck", (0.040, 0.560)),
    ("head", (0.000, 0.720)), ("liver", (-0.065, 0.150)), ("left kidney", (0.088, 0.050)),
    ("right kidney", (-0.088, 0.050)), ("abdomen", (0.000, 0.080)), ("pelvis", (0.000, -0.050)),
    ("left upper arm", (0.265, 0.300)), ("left forearm", (0.290, 0.030)),
    ("right upper arm", (-0.265, 0.300)), ("right forearm", (-0.290, 0.030)),
    ("left thigh", (0.095, -0.380)), ("left shin", (0.095, -0.700)),
    ("right thigh", (-0.095, -0.380)), ("right shin", (-0.095, -0.700)),
]


def anchors():
    return [
        {
            "id": i + 1,
            "name": n,
            "region": "torso_head" if i < 12 else "limb",
            "center_xyz_m": [x, y, 0.0],
            "patch_half_width_m": 0.025,
            "stack_ref": "default",
        }
        for i, (n, (x, y)) in enumerate(ANCHORS)
    ]


if __name__ == "__main__":
    g = build()
    with open(sys.argv[1], "w") as f:
        json.dump(g, f, indent=1)
        f.write("\n")
    with open(sys.argv[2], "w") as f:
        json.dump(anchors(), f, indent=1)
        f.write("\n")
