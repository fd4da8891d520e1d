//! Embedded spherical designs: point sets on the sphere whose uniform average
//! integrates every spherical harmonic of degree 1..=t to zero.
//! Generated by `tools/spherical_design.py`.

// 36-point spherical 7-design, max harmonic residual 5.1e-15
pub const DESIGN_36_7: [[f64; 3]; 36] = [
    [8.16956445935861086e-02, -3.71224297343798360e-01, 9.24942345617304817e-01],
    [-2.87680728856473777e-01, 1.62948553678585129e-01, 9.43762452685348863e-01],
    [3.49407781800502082e-01, 1.77876479028894058e-01, 9.19931606275997127e-01],
    [-3.50330910830469189e-01, -6.03293753897487073e-01, 7.16452998754958381e-01],
    [-1.70378425077594320e-01, 6.42928143647135020e-01, 7.46735960279486966e-01],
    [5.98592788578210855e-01, -3.98469528520802585e-01, 6.94916331872097226e-01],
    [-7.03137932616036410e-01, -5.45732639594947930e-02, 7.08956138683666248e-01],
    [5.86646753624512907e-01, 5.11318838935380326e-01, 6.28011649105010616e-01],
    [1.16726503635061679e-01, -8.94289779054595169e-01, 4.31996197237449531e-01],
    [-6.35013779678621160e-01, 6.65811498969520410e-01, 3.91730197276431602e-01],
    [9.04058924762301319e-01, -4.87453527592895171e-03, 4.27380041021425683e-01],
    [-7.41127449148951678e-01, -5.85424546020333447e-01, 3.28646017828992887e-01],
    [1.85115896581157291e-01, 8.94350376835976846e-01, 4.07270804608310444e-01],
    [5.98098996346509204e-01, -7.62395461040116351e-01, 2.47044027563361440e-01],
    [-9.27463635748772774e-01, 2.22543892480748795e-01, 3.00475323917264114e-01],
    [8.70881500270950459e-01, 4.86480466662571776e-01, 7.00154842987250614e-02],
    [-2.76714397517563826e-01, -9.59464624982501180e-01, 5.34488130240525980e-02],
    [-2.99271214747351522e-01, 9.53757791597161786e-01, 2.79788311290789932e-02],
    [9.52878061598281700e-01, -3.02015738165222758e-01, -2.84586300657085831e-02],
    [-9.60558927547611741e-01, -2.72667236853657735e-01, -5.45813581286996724e-02],
    [4.89941115104017499e-01, 8.69282588993807392e-01, -6.56161885730603828e-02],
    [2.18864091751986983e-01, -9.27445810493761402e-01, -3.03220675316093813e-01],
    [-7.59079895400624594e-01, 6.01083233856473997e-01, -2.49993316661106302e-01],
    [8.95952661575550646e-01, 1.83312669132336681e-01, -4.04555674229475137e-01],
    [-5.89317473096548805e-01, -7.38461649061265546e-01, -3.27687822124678230e-01],
    [4.90427631476350145e-04, 9.05139228431920295e-01, -4.25114968725410158e-01],
    [6.64041862326705479e-01, -6.36030604221121454e-01, -3.93082021430382955e-01],
    [-8.92630645377023080e-01, 1.20316576414831899e-01, -4.34435786248800138e-01],
    [5.15779211355664180e-01, 5.86180608689436444e-01, -6.24791244440741855e-01],
    [-5.79569443162347639e-02, -7.02306262712692697e-01, -7.09511737718309443e-01],
    [-3.93581811973074791e-01, 6.00492386255486399e-01, -6.96061959406763520e-01],
    [6.42634035698225858e-01, -1.70394640487823795e-01, -7.46985383160364558e-01],
    [-6.03682829911786123e-01, -3.47953625180623005e-01, -7.17283288243466655e-01],
    [1.81063425587745686e-01, 3.51417879824555468e-01, -9.18543145232734948e-01],
    [1.63599181278847650e-01, -2.86948159912513101e-01, -9.43872905325560008e-01],
    [-3.68541862256554775e-01, 8.29923037489177645e-02, -9.25899116147606005e-01],
];

// 100-point spherical 13-design, max harmonic residual 2.0e-14
pub const DESIGN_100_13: [[f64; 3]; 100] = [
    [2.68552913857485476e-02, -1.41603604051650539e-01, 9.89559100127006097e-01],
    [-1.97643282697554795e-01, 9.32455029681208275e-02, 9.75829087996846201e-01],
    [2.87239003565911588e-01, 8.46095012403264013e-02, 9.54114766225911404e-01],
    [-2.47703325885659770e-01, -3.86176010166445705e-01, 8.88544400419645775e-01],
    [2.05128266023124756e-02, 3.80151958117703859e-01, 9.24696551677391620e-01],
    [3.83418516792103092e-01, -2.84756163412283159e-01, 8.78580769411475782e-01],
    [-4.76978077282950275e-01, -1.10586012098335948e-01, 8.71930414493981676e-01],
    [3.60181774344159100e-01, 4.10816150389741175e-01, 8.37555478764987149e-01],
    [7.79877970265648035e-02, -5.08823243064053798e-01, 8.57331214194795410e-01],
    [-3.13378614696847579e-01, 4.37701257846464131e-01, 8.42740442087780650e-01],
    [6.04765153437695102e-01, 2.06420704221549909e-03, 7.96401185481769636e-01],
    [-5.42731525087567612e-01, -4.63226917633299706e-01, 7.00616381806816846e-01],
    [7.32725930923273927e-02, 6.92137106368883814e-01, 7.18037153000340655e-01],
    [3.99606598189830298e-01, -5.86306398700321640e-01, 7.04669691079594429e-01],
    [-5.85541599300419713e-01, 1.88292595075070707e-01, 7.88471263984047988e-01],
    [6.46367859878993145e-01, 3.56527393454738106e-01, 6.74608632787796925e-01],
    [-1.99715666046620444e-01, -7.10883574376875993e-01, 6.74357617601159420e-01],
    [-2.81183126335358857e-01, 7.11554272710955171e-01, 6.43915030459032978e-01],
    [7.18183680372675659e-01, -2.81670480475842977e-01, 6.36297054586037025e-01],
    [-7.65268511973923315e-01, -2.00275296252694968e-01, 6.11762952696640827e-01],
    [3.41900270834514186e-01, 7.36410262664562554e-01, 5.83784317916810847e-01],
    [1.04579691844821160e-01, -8.13573403229508330e-01, 5.71980249319151035e-01],
    [-6.32471825030611057e-01, 4.85132476284708847e-01, 6.03842587928604679e-01],
    [8.52196213977208905e-01, 9.31444292412953595e-02, 5.14864766889544079e-01],
    [-4.61014847951419782e-01, -7.53829705021675345e-01, 4.68194495690907764e-01],
    [-1.16345027351005229e-01, 9.03219523244146116e-01, 4.13108130446873778e-01],
    [6.64989539149874465e-01, -5.71943676991581218e-01, 4.80280483853536944e-01],
    [-8.40365554897850919e-01, 1.12398953149138239e-01, 5.30237880080445811e-01],
    [6.49972887992929294e-01, 6.00960090939301805e-01, 4.65169016565330884e-01],
    [-1.46969639183363421e-01, -9.40159299220727496e-01, 3.07409201630501894e-01],
    [-5.54649832488883887e-01, 7.38392835402373882e-01, 3.83587778671969526e-01],
    [9.19626973044422757e-01, -2.12826642877967570e-01, 3.30137926525333691e-01],
    [-7.52092287450806918e-01, -5.29873594717879426e-01, 3.91907086919546843e-01],
    [1.96107685221278361e-01, 9.34689524238753067e-01, 2.96474735981812565e-01],
    [3.65638406939043870e-01, -8.45625425124155283e-01, 3.88878124551471471e-01],
    [-8.49150217427908194e-01, 4.15520355939995201e-01, 3.26016475107679060e-01],
    [9.12731899572129191e-01, 2.97397222703259745e-01, 2.80134559509962133e-01],
    [-4.61834539328110305e-01, -8.76728757179832896e-01, 1.34370921770663315e-01],
    [-3.54794953942090374e-01, 9.21896127009826927e-01, 1.55653691448391612e-01],
    [8.52177911311877589e-01, -4.97783602477031850e-01, 1.61258465133195444e-01],
    [-9.37626141182665407e-01, -2.02613631340382655e-01, 2.82497673912490699e-01],
    [5.20192794241040812e-01, 8.27264982164061191e-01, 2.12207695677592983e-01],
    [9.29010730831058007e-02, -9.87835203783321680e-01, 1.24703651856594516e-01],
    [-7.21422915056038394e-01, 6.87611383036302981e-01, 8.20948448500313788e-02],
    [9.97861325518941689e-01, -2.96236576337733405e-02, 5.82684643866461099e-02],
    [-7.56569430391898945e-01, -6.46688820898992378e-01, 9.69343381921435737e-02],
    [-3.36512643270134651e-03, 9.99976131342625751e-01, 6.03429110398204065e-03],
    [6.01982689188483633e-01, -7.82132813095678059e-01, 1.60888484971556583e-01],
    [-9.77608929873442500e-01, 1.43464649828413976e-01, 1.53943738038652578e-01],
    [8.18891477687974656e-01, 5.58789566879680177e-01, 1.31038039196351958e-01],
    [-2.56800332662922015e-01, -9.57552090376630138e-01, -1.30948781435943851e-01],
    [-4.58394406333123727e-01, 8.75274604763913944e-01, -1.54171769458216590e-01],
    [9.37144130848578172e-01, -3.09765004850665215e-01, -1.60644077967195514e-01],
    [-9.44922613276254486e-01, -3.27235392701905548e-01, -6.18487529412890032e-03],
    [3.60403200272600199e-01, 9.27739762627674769e-01, -9.69972477589641779e-02],
    [3.57683946998726576e-01, -9.32036490133570483e-01, -5.80532093764588447e-02],
    [-8.87345464720486476e-01, 4.53692023928403854e-01, -8.23503106474563484e-02],
    [9.63075537088715294e-01, 2.38697094149691008e-01, -1.24535967117038487e-01],
    [-6.08875108218378647e-01, -7.64351371757379883e-01, -2.12221778064056066e-01],
    [-1.18515568670823815e-01, 9.51868867113206507e-01, -2.82665384869198399e-01],
    [7.51434730320727162e-01, -6.39862185663835459e-01, -1.61003818045770686e-01],
    [-9.87315304583808673e-01, 3.02328617453258910e-02, -1.55866813033657736e-01],
    [6.74916591249416054e-01, 7.25562638503012169e-01, -1.34337085217806018e-01],
    [2.09488909800038398e-02, -9.59775400115397193e-01, -2.79986294843224792e-01],
    [-6.72688488727939848e-01, 6.64112810661467212e-01, -3.26258136830710532e-01],
    [9.19026301147854108e-01, -6.57501504888935301e-02, -3.88674125083188104e-01],
    [-8.17332000136029579e-01, -4.93976345129647942e-01, -2.96573383846211569e-01],
    [2.51690605881322749e-01, 8.84871959433038202e-01, -3.91986548647052735e-01],
    [5.04804609883757305e-01, -7.97703299791524656e-01, -3.29911732652569512e-01],
    [-8.80106151594330699e-01, 2.79461514162001601e-01, -3.83815612017148700e-01],
    [8.38858259775813964e-01, 4.49314967712944435e-01, -3.07299332565185823e-01],
    [-3.52345559593693236e-01, -8.12104894739484107e-01, -4.65121754570541002e-01],
    [-3.83646286625599908e-01, 7.55947853300346306e-01, -5.30432248123156813e-01],
    [7.59646472170331322e-01, -4.38731292658323058e-01, -4.80054257518383987e-01],
    [-8.90845031741353877e-01, -1.88691900527714729e-01, -4.13268068082915496e-01],
    [5.59261590201094783e-01, 6.84130832851952086e-01, -4.68178894512596866e-01],
    [1.93777209521005744e-01, -8.35186010142380808e-01, -5.14698670614859299e-01],
    [-6.66737574161389457e-01, 4.36561493026382363e-01, -6.04048897033974908e-01],
    [8.02554560010505402e-01, 1.70028051871549402e-01, -5.71836200133490902e-01],
    [-5.81955928567429726e-01, -5.66108345076037578e-01, -5.83822437767246960e-01],
    [-6.37028647352135824e-02, 7.88369809053717896e-01, -6.11894589939420475e-01],
    [5.03285897418945360e-01, -5.84872775944306200e-01, -6.36103090244347302e-01],
    [-7.64361542759751877e-01, 3.01831383250475149e-02, -6.44081058649284555e-01],
    [6.05109179102802375e-01, 4.23286550822323804e-01, -6.74293242779781310e-01],
    [-1.22788463399663400e-01, -7.27968650338089551e-01, -6.74525490534560901e-01],
    [-3.71024229803180894e-01, 4.90320842052284711e-01, -7.88623162700725522e-01],
    [6.85562486555984396e-01, -1.83541634815361093e-01, -7.04497370695221670e-01],
    [-6.28900577223854618e-01, -2.97959722436007046e-01, -7.18125384437397596e-01],
    [2.58029052612475662e-01, 6.65202482227770564e-01, -7.00661591387683247e-01],
    [1.98045554827657538e-01, -5.71599640488688721e-01, -7.96273702445463916e-01],
    [-5.16485593909237317e-01, 1.51026653832005586e-01, -8.42872221108591280e-01],
    [5.06194671635989635e-01, 9.43885424850672700e-02, -8.57238448423119470e-01],
    [-2.68554807843923660e-01, -4.75818776218996264e-01, -8.37540928779823890e-01],
    [-5.30432600056698206e-02, 4.86597354449264663e-01, -8.72014579700905901e-01],
    [3.95636866434106504e-01, -2.67926605759114811e-01, -8.78457058623016040e-01],
    [-3.51827366846973189e-01, -1.45108543346760904e-01, -9.24749163062777102e-01],
    [2.82828213624677249e-01, 3.61257473384065608e-01, -8.88538822732037548e-01],
    [1.52532736826263091e-02, -2.99205630144984080e-01, -9.54066731697267523e-01],
    [-1.53107155543233647e-01, 1.55586258763915186e-01, -9.75884785722837322e-01],
    [1.42732912438282178e-01, 2.12931869409709075e-02, -9.89532170218221152e-01],
];
